//! The interpolation path in `t` and its derivative observable.
//!
//! The sub-group rows enter the energy with weight `t`. Differentiating the
//! per-section free entropy in `t` gives two equivalent expressions, both
//! exact in quenched expectation at finite size:
//!
//! * the direct form, from differentiating the energy under the Gibbs
//!   bracket,
//!
//!   ```text
//!     (1 / 2 delta L) * sum_nu E< [phi xbar]_nu^2
//!                                - sqrt(delta/t) * z_nu * [phi xbar]_nu >,
//!   ```
//!
//! * the mean-square form, after Gaussian integration by parts over `z_nu`,
//!
//!   ```text
//!     (1 / 2 delta L) * sum_nu E[ < [phi xbar]_nu >^2 ].
//!   ```
//!
//! The direct form needs `t > 0`; the mean-square form extends to `t = 0`
//! and is the quadrature integrand used by [`integrate_path`]. Integrating
//! the derivative across `[0, 1]` reconstructs the information difference
//! between the two endpoint models, which the path report compares against
//! the directly estimated difference and against the closed form
//! `(|S| / 2L) * ln(1 + E_0 / delta)` that the difference approaches as `L`
//! grows (`E_0` is the `t = 0` estimation error).

use crate::error::{Error, Result};
use crate::instance::{sample_instance, Instance};
use crate::params::ModelParams;
use crate::posterior::{enumerate_posterior, PosteriorSummary};
use crate::prior::Prior;
use crate::quenched::{map_samples, sample_info, EstimateWithError, SamplingPlan};
use crate::stats::mean_and_se;

/// Both per-sample derivative forms for one enumerated instance.
fn sample_dt_forms(
    summary: &PosteriorSummary,
    inst: &Instance,
    params: &ModelParams,
) -> (f64, f64) {
    let m = params.m;
    let sub = params.sub_rows();
    let scale = 0.5 / (params.delta * params.l as f64);
    let root = (params.delta / params.t).sqrt();
    let mut direct = 0.0;
    let mut mean_square = 0.0;
    for nu in m..m + sub {
        direct += summary.row_sq[nu] - root * inst.z[nu] * summary.row_mean[nu];
        mean_square += summary.row_mean[nu] * summary.row_mean[nu];
    }
    (scale * direct, scale * mean_square)
}

fn sample_mean_square_dt(summary: &PosteriorSummary, params: &ModelParams) -> f64 {
    let m = params.m;
    let sub = params.sub_rows();
    let scale = 0.5 / (params.delta * params.l as f64);
    summary.row_mean[m..m + sub].iter().map(|r| r * r).sum::<f64>() * scale
}

/// The derivative of the per-section information in `t`, estimated in both
/// forms on the same instances.
#[derive(Clone, Copy, Debug)]
pub struct DtDerivative {
    /// Direct differentiation of the energy under the Gibbs bracket.
    pub direct: EstimateWithError,
    /// Integration-by-parts reduction to squared posterior row means.
    pub mean_square: EstimateWithError,
    /// Per-sample paired difference `direct - mean_square`; its mean is zero
    /// in expectation, with a standard error that profits from the coupling.
    pub difference: EstimateWithError,
}

/// Estimates the `t`-derivative in the direct and mean-square forms.
///
/// The direct form divides by `sqrt(t)`, so `t` must be positive; the
/// sub-group must be nonempty for the derivative to be nontrivial.
pub fn dt_derivative(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
) -> Result<DtDerivative> {
    params.validate()?;
    if params.t <= 0.0 {
        return Err(Error::InvalidParams(
            "dt_derivative needs t > 0 for the direct form; use the path integrand at t = 0".into(),
        ));
    }
    if params.sub_rows() == 0 {
        return Err(Error::InvalidParams("dt_derivative needs a nonempty sub-group".into()));
    }
    let pairs = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let summary = enumerate_posterior(&inst, prior, params)?;
        Ok(sample_dt_forms(&summary, &inst, params))
    })?;
    let direct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mean_square: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(DtDerivative {
        direct: EstimateWithError::from_values(plan, &direct),
        mean_square: EstimateWithError::from_values(plan, &mean_square),
        difference: EstimateWithError::from_values(plan, &diffs),
    })
}

/// A finite-difference derivative estimate with its Richardson bias bound.
#[derive(Clone, Copy, Debug)]
pub struct FdDerivative {
    /// Central difference at half the requested step.
    pub value: EstimateWithError,
    /// `|fd(step) - fd(step/2)| / 3`, the leading-order bias of `value`.
    pub bias: f64,
    pub step: f64,
}

/// Central finite difference of the mutual information in `t`, with common
/// random numbers across the four evaluation points and a step-halving bias
/// bound.
pub fn dt_fd(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
    step: f64,
) -> Result<FdDerivative> {
    params.validate()?;
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::InvalidArgument("fd step must be positive and finite".into()));
    }
    if params.t - step < 0.0 || params.t + step > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "fd stencil [{}, {}] leaves [0, 1]",
            params.t - step,
            params.t + step
        )));
    }
    let offsets = [-step, -0.5 * step, 0.5 * step, step];
    let pairs = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let mut info = [0.0; 4];
        for (slot, off) in info.iter_mut().zip(offsets) {
            let mut shifted = params.clone();
            shifted.t = params.t + off;
            let summary = enumerate_posterior(&inst, prior, &shifted)?;
            *slot = sample_info(&inst, prior, &shifted, summary.log_z);
        }
        let full = (info[3] - info[0]) / (2.0 * step);
        let half = (info[2] - info[1]) / step;
        Ok((half, full))
    })?;
    let halves: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let fulls: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let value = EstimateWithError::from_values(plan, &halves);
    let (full_mean, _) = mean_and_se(&fulls);
    Ok(FdDerivative { value, bias: (full_mean - value.mean).abs() / 3.0, step })
}

/// Estimates at one grid point of the interpolation path.
#[derive(Clone, Copy, Debug)]
pub struct PathPoint {
    pub t: f64,
    /// Per-section mutual information `i` at this `t`.
    pub info: EstimateWithError,
    /// Per-section estimation error `E` at this `t`.
    pub mmse: EstimateWithError,
    /// Sub-group measurement error `Y` at this `t` (zero if `|S| = 0`).
    pub sub_mmse: EstimateWithError,
    /// The quadrature integrand: the mean-square derivative form, which is
    /// defined on all of `[0, 1]`.
    pub dt: EstimateWithError,
}

/// Reconstruction of the information difference between the path endpoints.
#[derive(Clone, Debug)]
pub struct PathReport {
    pub points: Vec<PathPoint>,
    /// Directly estimated `i(1) - i(0)`, paired per sample.
    pub endpoint_diff: EstimateWithError,
    /// Trapezoidal quadrature of the integrand along the grid.
    pub quadrature: EstimateWithError,
    /// Paired per-sample `endpoint_diff - quadrature`; zero in expectation
    /// up to the quadrature discretization error.
    pub quadrature_residual: EstimateWithError,
    /// Bound on the quadrature discretization error, from grid coarsening
    /// when the grid nests (odd point count) and from a second-difference
    /// curvature bound otherwise.
    pub quadrature_bias: f64,
    /// Closed-form prediction `(|S| / 2L) ln(1 + E_0 / delta)`.
    pub closed_form: f64,
    /// Standard error propagated from the `E_0` estimate.
    pub closed_form_se: f64,
    /// `endpoint_diff - closed_form`; shrinks with `L` but is not zero at
    /// finite size.
    pub closed_form_residual: f64,
    pub warnings: Vec<String>,
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for j in 0..n - 1 {
        let half = 0.5 * (grid[j + 1] - grid[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    w
}

/// Integrates the mean-square derivative form along `t_grid` and compares
/// the reconstruction with the direct endpoint difference and the closed
/// form. `params.t` is ignored; the grid must start at 0 and end at 1.
pub fn integrate_path(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
    t_grid: &[f64],
) -> Result<PathReport> {
    params.validate()?;
    if t_grid.len() < 2 {
        return Err(Error::InvalidArgument("t grid needs at least 2 points".into()));
    }
    if t_grid[0] != 0.0 || *t_grid.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument("t grid must start at 0 and end at 1".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("t grid must be finite and strictly increasing".into()));
    }

    let mut warnings = Vec::new();
    if t_grid.len() < 5 {
        warnings.push("t grid has fewer than 5 points; the quadrature bias bound is crude".into());
    }
    if params.h == 0.0 {
        warnings.push("h = 0: the side-channel perturbation is off".into());
    }

    let npts = t_grid.len();
    let m = params.m;
    let sub = params.sub_rows();
    let weights = trapezoid_weights(t_grid);

    struct SamplePath {
        info: Vec<f64>,
        mmse: Vec<f64>,
        sub_mmse: Vec<f64>,
        dt: Vec<f64>,
    }
    let samples = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let mut path = SamplePath {
            info: Vec::with_capacity(npts),
            mmse: Vec::with_capacity(npts),
            sub_mmse: Vec::with_capacity(npts),
            dt: Vec::with_capacity(npts),
        };
        for &t in t_grid {
            let mut at_t = params.clone();
            at_t.t = t;
            let summary = enumerate_posterior(&inst, prior, &at_t)?;
            path.info.push(sample_info(&inst, prior, &at_t, summary.log_z));
            path.mmse.push(summary.section_mmse_term);
            path.sub_mmse.push(if sub == 0 {
                0.0
            } else {
                summary.row_mean[m..m + sub].iter().map(|r| r * r).sum::<f64>() / sub as f64
            });
            path.dt.push(sample_mean_square_dt(&summary, &at_t));
        }
        Ok(path)
    })?;

    let column = |get: &dyn Fn(&SamplePath) -> &[f64], j: usize| -> Vec<f64> {
        samples.iter().map(|s| get(s)[j]).collect()
    };
    let points: Vec<PathPoint> = (0..npts)
        .map(|j| PathPoint {
            t: t_grid[j],
            info: EstimateWithError::from_values(plan, &column(&|s| &s.info, j)),
            mmse: EstimateWithError::from_values(plan, &column(&|s| &s.mmse, j)),
            sub_mmse: EstimateWithError::from_values(plan, &column(&|s| &s.sub_mmse, j)),
            dt: EstimateWithError::from_values(plan, &column(&|s| &s.dt, j)),
        })
        .collect();

    let quad_per_sample: Vec<f64> =
        samples.iter().map(|s| s.dt.iter().zip(&weights).map(|(d, w)| d * w).sum()).collect();
    let endpoint_per_sample: Vec<f64> =
        samples.iter().map(|s| s.info[npts - 1] - s.info[0]).collect();
    let residual_per_sample: Vec<f64> =
        endpoint_per_sample.iter().zip(&quad_per_sample).map(|(e, q)| e - q).collect();

    let quadrature = EstimateWithError::from_values(plan, &quad_per_sample);
    let endpoint_diff = EstimateWithError::from_values(plan, &endpoint_per_sample);
    let quadrature_residual = EstimateWithError::from_values(plan, &residual_per_sample);

    // Trapezoid error is O(step^2): comparing with the nested coarse grid
    // (every other point) isolates it; |fine - coarse| / 3 bounds the fine
    // error to leading order.
    let quadrature_bias = if npts >= 3 && (npts - 1).is_multiple_of(2) {
        let coarse_grid: Vec<f64> = t_grid.iter().copied().step_by(2).collect();
        let coarse_weights = trapezoid_weights(&coarse_grid);
        let coarse: Vec<f64> = samples
            .iter()
            .map(|s| s.dt.iter().step_by(2).zip(&coarse_weights).map(|(d, w)| d * w).sum())
            .collect();
        let (coarse_mean, _) = mean_and_se(&coarse);
        (quadrature.mean - coarse_mean).abs() / 3.0
    } else {
        // Curvature bound (max |f''| / 12) * max_step^2 * range from second
        // divided differences of the integrand means.
        let d_means: Vec<f64> = points.iter().map(|p| p.dt.mean).collect();
        let mut max_curv = 0.0f64;
        for j in 1..npts - 1 {
            let left = (d_means[j] - d_means[j - 1]) / (t_grid[j] - t_grid[j - 1]);
            let right = (d_means[j + 1] - d_means[j]) / (t_grid[j + 1] - t_grid[j]);
            let curv = 2.0 * (right - left) / (t_grid[j + 1] - t_grid[j - 1]);
            max_curv = max_curv.max(curv.abs());
        }
        let max_step = t_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        max_curv / 12.0 * max_step * max_step
    };

    let e0 = points[0].mmse;
    let scale = sub as f64 / (2.0 * params.l as f64);
    let closed_form = scale * (1.0 + e0.mean / params.delta).ln();
    let closed_form_se = scale * e0.std_error / (params.delta + e0.mean);

    Ok(PathReport {
        closed_form_residual: endpoint_diff.mean - closed_form,
        points,
        endpoint_diff,
        quadrature,
        quadrature_residual,
        quadrature_bias,
        closed_form,
        closed_form_se,
        warnings,
    })
}
