//! Task runners. Each consumes a resolved run and pushes rows into the
//! output builder in a fixed order, so the rendered files are identical
//! for identical configs.

use rle_core::interpolation::{dt_derivative, dt_fd, integrate_path};
use rle_core::quenched::{instance_digest, mmse, mutual_info};
use rle_core::relations::{
    boundedness_moments, check_alpha_immse, check_canonical_immse, check_log_identity,
    check_mmse_variation, check_snr_immse, check_sub_mmse_relation, concentration_scan,
    nishimori_suite, size_plan,
};
use rle_core::{
    Error, EstimateWithError, ModelParams, RelationReport, Result, SamplingPlan, Z_THRESHOLD,
};

use crate::config::{ResolvedRun, TaskKind};
use crate::output::OutputBuilder;

pub fn run_task(run: &ResolvedRun, out: &mut OutputBuilder) -> Result<()> {
    match run.config.task {
        TaskKind::Verify => verify(run, out),
        TaskKind::Sweep => sweep(run, out),
        TaskKind::Scaling => scaling(run, out),
        TaskKind::Path => path(run, out),
    }
}

/// Order-independent fingerprint of every instance stream the task will
/// consume; recorded in the manifest so a reproduction can be checked
/// against more than the config echo.
pub fn stream_digest(run: &ResolvedRun) -> Result<u64> {
    match run.config.task {
        TaskKind::Scaling => {
            let mut acc = 0u64;
            for params in per_size_params(&run.params, &run.config.scaling.l_grid) {
                let plan = size_plan(&run.plan, params.l);
                acc = acc.wrapping_add(instance_digest(&run.prior, &params, &plan)?);
            }
            Ok(acc)
        }
        _ => instance_digest(&run.prior, &run.params, &run.plan),
    }
}

fn verify(run: &ResolvedRun, out: &mut OutputBuilder) -> Result<()> {
    point_battery(run, &run.params, out)?;
    let reports = boundedness_moments(
        &run.prior,
        &run.params,
        &run.plan,
        run.config.verify.max_moment_power,
    )?;
    for report in &reports {
        out.relation(report);
    }
    Ok(())
}

fn sweep(run: &ResolvedRun, out: &mut OutputBuilder) -> Result<()> {
    let grids = &run.config.sweep;
    if grids.delta.is_none() && grids.t.is_none() && grids.h.is_none() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one of sweep.delta, sweep.t, sweep.h".into(),
        ));
    }
    let deltas = grids.delta.clone().unwrap_or_else(|| vec![run.params.delta]);
    let ts = grids.t.clone().unwrap_or_else(|| vec![run.params.t]);
    let hs = grids.h.clone().unwrap_or_else(|| vec![run.params.h]);
    if deltas.is_empty() || ts.is_empty() || hs.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must not be empty".into()));
    }

    // Validate the whole grid before any sampling starts.
    let mut points = Vec::new();
    for &delta in &deltas {
        for &t in &ts {
            for &h in &hs {
                let mut params = run.params.clone();
                params.delta = delta;
                params.t = t;
                params.h = h;
                params.validate()?;
                points.push(params);
            }
        }
    }
    for params in &points {
        point_battery(run, params, out)?;
    }
    Ok(())
}

/// The identity battery at one parameter point. Instances are shared
/// across points of a sweep (the disorder does not depend on `delta`, `t`
/// or `h`), so estimates move smoothly along a grid.
fn point_battery(run: &ResolvedRun, params: &ModelParams, out: &mut OutputBuilder) -> Result<()> {
    let prior = &run.prior;
    let plan = &run.plan;
    let cfg = &run.config.verify;

    out.estimate("mutual-information", params, mutual_info(prior, params, plan)?);
    out.estimate("section-mmse", params, mmse(prior, params, plan)?);

    for report in &nishimori_suite(prior, params, plan)? {
        out.relation(report);
    }

    if params.t != 0.0 || params.h != 0.0 {
        out.skip("canonical-immse", "requires t = 0 and h = 0");
    } else if params.m == 0 || 1.0 / params.delta <= cfg.fd_step_delta {
        out.skip("canonical-immse", "needs m >= 1 and 1/delta larger than the fd step");
    } else {
        out.relation(&check_canonical_immse(prior, params, plan, cfg.fd_step_delta)?);
    }

    if params.t > 0.0 && params.sub_rows() > 0 {
        let d = dt_derivative(prior, params, plan)?;
        out.relation(&paired_report(
            "dt-direct-vs-mean-square",
            params,
            plan,
            d.direct,
            d.mean_square,
            d.difference,
            0.0,
            "paired error from the per-sample difference",
        ));
        let step = cfg.fd_step_t;
        if params.t - step >= 0.0 && params.t + step <= 1.0 {
            let fd = dt_fd(prior, params, plan, step)?;
            out.relation(&RelationReport::two_sided(
                "dt-direct-vs-fd",
                params,
                plan,
                d.direct,
                fd.value,
                fd.bias,
            ));
            out.relation(&RelationReport::two_sided(
                "dt-mean-square-vs-fd",
                params,
                plan,
                d.mean_square,
                fd.value,
                fd.bias,
            ));
        } else {
            out.skip(
                "dt-direct-vs-fd",
                &format!("t = {} leaves no room for the central step {}", params.t, step),
            );
        }
    } else {
        out.skip("dt-direct-vs-mean-square", "requires t > 0 and a nonempty sub-group");
    }
    Ok(())
}

const SCALING_CHECKS: [&str; 6] = [
    "snr-immse",
    "sub-mmse-relation",
    "mmse-variation",
    "alpha-immse",
    "log-identity",
    "overlap-concentration",
];

fn scaling(run: &ResolvedRun, out: &mut OutputBuilder) -> Result<()> {
    let cfg = &run.config.scaling;
    if cfg.l_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "scaling.l_grid needs at least 3 strictly increasing sizes".into(),
        ));
    }
    if cfg.checks.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "scaling.checks must list at least one of: {}",
            SCALING_CHECKS.join(", ")
        )));
    }
    for check in &cfg.checks {
        if !SCALING_CHECKS.contains(&check.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown scaling check '{check}'; valid: {}",
                SCALING_CHECKS.join(", ")
            )));
        }
    }

    let prior = &run.prior;
    let plan = &run.plan;
    let template = &run.params;
    let sizes = per_size_params(template, &cfg.l_grid);
    for check in &cfg.checks {
        match check.as_str() {
            "snr-immse" => {
                out.scaling(&check_snr_immse(prior, template, &cfg.l_grid, plan)?, &sizes, plan);
            }
            "sub-mmse-relation" => {
                out.scaling(
                    &check_sub_mmse_relation(prior, template, &cfg.l_grid, plan)?,
                    &sizes,
                    plan,
                );
            }
            "mmse-variation" => {
                out.scaling(
                    &check_mmse_variation(prior, template, &cfg.l_grid, plan)?,
                    &sizes,
                    plan,
                );
            }
            "alpha-immse" => {
                let (reports, grid) =
                    check_alpha_immse(prior, template, &cfg.l_grid, cfg.dm, plan)?;
                for report in &reports {
                    out.relation(report);
                }
                out.scaling(&grid, &sizes, plan);
            }
            "log-identity" => {
                let (reports, grid) = check_log_identity(
                    prior,
                    template,
                    &cfg.l_grid,
                    cfg.fd_step_delta,
                    cfg.dm,
                    plan,
                )?;
                for report in &reports {
                    out.relation(report);
                }
                out.scaling(&grid, &sizes, plan);
            }
            "overlap-concentration" => {
                out.scaling(
                    &concentration_scan(
                        prior,
                        template,
                        &cfg.l_grid,
                        (cfg.h_window[0], cfg.h_window[1]),
                        cfg.h_points,
                        plan,
                    )?,
                    &sizes,
                    plan,
                );
            }
            _ => unreachable!("validated above"),
        }
    }
    Ok(())
}

fn path(run: &ResolvedRun, out: &mut OutputBuilder) -> Result<()> {
    let cfg = &run.config.path;
    let grid: Vec<f64> = match &cfg.t_grid {
        Some(grid) => grid.clone(),
        None => {
            if cfg.t_points < 2 {
                return Err(Error::InvalidArgument("path.t_points must be at least 2".into()));
            }
            (0..cfg.t_points).map(|i| i as f64 / (cfg.t_points - 1) as f64).collect()
        }
    };
    let report = integrate_path(&run.prior, &run.params, &run.plan, &grid)?;
    for warning in &report.warnings {
        out.warn(warning.clone());
    }
    for point in &report.points {
        let mut params = run.params.clone();
        params.t = point.t;
        out.estimate("path-information", &params, point.info);
        out.estimate("path-section-mmse", &params, point.mmse);
        out.estimate("path-sub-group-mmse", &params, point.sub_mmse);
        out.estimate("path-derivative", &params, point.dt);
    }
    out.relation(&paired_report(
        "path-endpoint-reconstruction",
        &run.params,
        &run.plan,
        report.endpoint_diff,
        report.quadrature,
        report.quadrature_residual,
        report.quadrature_bias,
        "paired error from per-sample endpoint-minus-quadrature",
    ));
    let closed = EstimateWithError {
        mean: report.closed_form,
        std_error: report.closed_form_se,
        n_samples: run.plan.n_samples,
        base_seed: run.plan.base_seed,
    };
    out.ungated(
        "path-closed-form",
        &run.params,
        &run.plan,
        closed,
        report.endpoint_diff,
        report.closed_form_residual,
        "asymptotic prediction; its decay is gated by the scaling task",
    );
    Ok(())
}

fn per_size_params(template: &ModelParams, l_grid: &[usize]) -> Vec<ModelParams> {
    l_grid
        .iter()
        .map(|&l| {
            let mut params = template.clone();
            params.l = l;
            params.m = l * params.b;
            params
        })
        .collect()
}

/// A two-sided report whose residual and error come from a per-sample
/// paired difference, which is sharper than combining the two sides'
/// errors when they share instances.
#[allow(clippy::too_many_arguments)]
fn paired_report(
    name: &str,
    params: &ModelParams,
    plan: &SamplingPlan,
    lhs: EstimateWithError,
    rhs: EstimateWithError,
    difference: EstimateWithError,
    bias: f64,
    note: &str,
) -> RelationReport {
    let residual = difference.mean;
    let combined_error = difference.std_error + bias;
    let z_score = if residual == 0.0 { 0.0 } else { residual / combined_error };
    RelationReport {
        name: name.into(),
        lhs,
        rhs,
        residual,
        combined_error,
        z_score,
        pass: z_score.abs() <= Z_THRESHOLD,
        one_sided: false,
        fd_bias: bias,
        params: params.clone(),
        plan: plan.clone(),
        notes: vec![note.into()],
    }
}
