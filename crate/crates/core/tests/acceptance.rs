//! Release gates, one verdict line per criterion.
//!
//! Runs as its own binary (no default harness) so the lines stream to stdout
//! and the exit code reflects the overall verdict. Criteria 2 through 10 are
//! executed twice, inside single-worker and eight-worker thread pools, and
//! their formatted outputs must match byte for byte; the eight-worker run
//! supplies the official numbers.

mod common;

use std::fmt::Write as _;
use std::time::Instant;

use rle_core::interpolation::{dt_derivative, dt_fd, integrate_path};
use rle_core::relations::{
    check_alpha_immse, check_canonical_immse, check_log_identity, check_mmse_variation,
    check_snr_immse, check_sub_mmse_relation, concentration_scan, nishimori_suite,
};
use rle_core::{
    enumerate_posterior, sample_instance, EstimateWithError, ModelParams, Prior, RelationReport,
    SamplingPlan, ScalingReport, StreamKey,
};

use common::naive_summary;

const SEED: u64 = 1_7321;
const L_GRID: [usize; 4] = [4, 8, 12, 16];

fn prior() -> Prior {
    Prior::rademacher()
}

/// The L=8 parameter point shared by criteria 2-4 and 10.
fn desk_params() -> ModelParams {
    ModelParams::new(8, 1, 8, 1.0).with_t(0.5).with_h(0.01).with_sub_set_size(1)
}

struct Line {
    idx: usize,
    name: &'static str,
    ok: bool,
    secs: f64,
    limit: f64,
    detail: String,
}

impl Line {
    fn verdict(&self) -> bool {
        self.ok && self.secs < self.limit
    }

    fn print(&self) {
        println!(
            "criterion {:>2} [{}] {}: {} ({:.1}s / limit {:.0}s)",
            self.idx,
            if self.verdict() { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.secs,
            self.limit
        );
    }
}

fn timed(
    idx: usize,
    name: &'static str,
    limit: f64,
    f: impl FnOnce(&mut String) -> (bool, String),
    transcript: &mut String,
) -> Line {
    let t0 = Instant::now();
    let (ok, detail) = f(transcript);
    Line { idx, name, ok, secs: t0.elapsed().as_secs_f64(), limit, detail }
}

fn put_est(t: &mut String, label: &str, e: &EstimateWithError) {
    writeln!(t, "{label} mean={:.16e} se={:.16e} n={}", e.mean, e.std_error, e.n_samples).unwrap();
}

fn put_relation(t: &mut String, r: &RelationReport) {
    writeln!(
        t,
        "{} lhs={:.16e} lse={:.16e} rhs={:.16e} rse={:.16e} res={:.16e} comb={:.16e} z={:.16e} \
         fd={:.16e} pass={}",
        r.name,
        r.lhs.mean,
        r.lhs.std_error,
        r.rhs.mean,
        r.rhs.std_error,
        r.residual,
        r.combined_error,
        r.z_score,
        r.fd_bias,
        r.pass
    )
    .unwrap();
}

fn put_scaling(t: &mut String, s: &ScalingReport) {
    write!(t, "{} sizes=", s.name).unwrap();
    for l in &s.sizes {
        write!(t, "{l},").unwrap();
    }
    write!(t, " res=").unwrap();
    for r in &s.residuals {
        write!(t, "{r:.16e},").unwrap();
    }
    write!(t, " err=").unwrap();
    for e in &s.errors {
        write!(t, "{e:.16e},").unwrap();
    }
    writeln!(
        t,
        " slope={:.16e} slope_se={:.16e} monotone={} pass={}",
        s.slope, s.slope_se, s.monotone, s.pass
    )
    .unwrap();
}

fn zscore(a: &EstimateWithError, b: &EstimateWithError, bias: f64) -> f64 {
    let res = a.mean - b.mean;
    let comb = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt() + bias;
    if res == 0.0 {
        0.0
    } else {
        res / comb
    }
}

/// Criterion 1: Gray enumeration vs direct summation on 100 small instances.
fn criterion_1() -> Line {
    let t0 = Instant::now();
    let priors = [
        Prior::new(vec![vec![0.8]], vec![1.0]).unwrap(),
        Prior::rademacher(),
        Prior::new(vec![vec![0.0], vec![1.5], vec![-0.5]], vec![0.5, 0.2, 0.3]).unwrap(),
        Prior::new(vec![vec![0.3, -1.2], vec![1.0, 0.4]], vec![0.35, 0.65]).unwrap(),
        Prior::new(vec![vec![0.3, -1.2], vec![1.0, 0.4], vec![-0.7, 0.9]], vec![0.2, 0.5, 0.3])
            .unwrap(),
    ];
    let ts = [0.0, 0.3, 0.7, 1.0];
    let hs = [0.0, 0.02, 0.4];
    let deltas = [1.0, 0.6, 1.7, 0.01];
    let ls = [1, 2, 3, 4, 5, 6];
    let subs = [0, 1, 2];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 100 {
        let case = checked;
        let p = &priors[case % priors.len()];
        let l = ls[case % ls.len()];
        let m = case % (2 * l + 1);
        let sub = subs[case % subs.len()];
        let params = ModelParams::new(l, p.b(), m, deltas[case % deltas.len()])
            .with_t(ts[case % ts.len()])
            .with_h(hs[case % hs.len()])
            .with_sub_set_size(sub);
        let inst = sample_instance(&params, p, StreamKey::new(40_000 + case as u64, 9, 0))
            .expect("criterion 1 instance");
        let fast = enumerate_posterior(&inst, p, &params).expect("criterion 1 enumeration");
        let slow = naive_summary(&inst, p, &params);
        let mut gap = common::rel_gap(fast.log_z, slow.log_z)
            .max(common::rel_gap(fast.overlap_mean, slow.overlap_mean))
            .max(common::rel_gap(fast.overlap_sq, slow.overlap_sq))
            .max(common::rel_gap(fast.section_mmse_term, slow.section_mmse_term));
        for (a, b) in fast
            .mean
            .iter()
            .zip(&slow.mean)
            .chain(fast.mean_sq.iter().zip(&slow.mean_sq))
            .chain(fast.row_mean.iter().zip(&slow.row_mean))
            .chain(fast.row_sq.iter().zip(&slow.row_sq))
            .chain(fast.sub_overlap_cross.iter().zip(&slow.sub_overlap_cross))
            .chain(fast.sub_sq_overlap_cross.iter().zip(&slow.sub_sq_overlap_cross))
        {
            gap = gap.max(common::rel_gap(*a, *b));
        }
        for (fc, sc) in fast.sub_cross_mean.iter().zip(&slow.sub_cross_mean) {
            for (a, b) in fc.iter().zip(sc) {
                gap = gap.max(common::rel_gap(*a, *b));
            }
        }
        worst = worst.max(gap);
        checked += 1;
    }
    Line {
        idx: 1,
        name: "oracle equivalence",
        ok: worst <= 1e-10,
        secs: t0.elapsed().as_secs_f64(),
        limit: 10.0,
        detail: format!("100 instances, worst relative gap {worst:.2e}"),
    }
}

fn criterion_2(t: &mut String) -> (bool, String) {
    let params = desk_params();
    let plan = SamplingPlan::new(2000, SEED, "c2");
    let reports = nishimori_suite(&prior(), &params, &plan).expect("criterion 2");
    let mut zmax: f64 = 0.0;
    for r in &reports {
        put_relation(t, r);
        zmax = zmax.max(r.z_score.abs());
    }
    (reports.iter().all(|r| r.pass), format!("{} identities, max |z| = {zmax:.2}", reports.len()))
}

fn criterion_3(t: &mut String) -> (bool, String) {
    let params = desk_params().with_t(0.0).with_h(0.0);
    let plan = SamplingPlan::new(2000, SEED, "c3");
    let r = check_canonical_immse(&prior(), &params, &plan, 0.02).expect("criterion 3");
    put_relation(t, &r);
    (r.pass, format!("z = {:.2}, fd bias {:.1e}", r.z_score, r.fd_bias))
}

fn criterion_4(t: &mut String) -> (bool, String) {
    let mut ok = true;
    let mut zmax: f64 = 0.0;
    for tt in [0.25, 0.5, 0.75] {
        let params = desk_params().with_t(tt);
        let plan = SamplingPlan::new(2000, SEED, &format!("c4/t{tt}"));
        let forms = dt_derivative(&prior(), &params, &plan).expect("criterion 4 forms");
        let fd = dt_fd(&prior(), &params, &plan, 0.05).expect("criterion 4 fd");
        put_est(t, &format!("dt-direct t={tt}"), &forms.direct);
        put_est(t, &format!("dt-mean-square t={tt}"), &forms.mean_square);
        put_est(t, &format!("dt-paired-diff t={tt}"), &forms.difference);
        put_est(t, &format!("dt-fd t={tt}"), &fd.value);
        writeln!(t, "dt-fd-bias t={tt} {:.16e}", fd.bias).unwrap();
        // Pairwise: the two exact forms against each other (paired), and
        // each form against the finite difference (bias widened).
        let z_forms = if forms.difference.mean == 0.0 {
            0.0
        } else {
            forms.difference.mean / forms.difference.std_error
        };
        let z_dir = zscore(&forms.direct, &fd.value, fd.bias);
        let z_ms = zscore(&forms.mean_square, &fd.value, fd.bias);
        for z in [z_forms, z_dir, z_ms] {
            zmax = zmax.max(z.abs());
            ok &= z.abs() <= 4.0;
        }
    }
    (ok, format!("3 t-points x 3 pairs, max |z| = {zmax:.2}"))
}

fn criterion_5(t: &mut String) -> (bool, String) {
    let template = ModelParams::new(4, 1, 4, 1.0);
    let plan = SamplingPlan::new(4000, SEED, "c5");
    let s = check_snr_immse(&prior(), &template, &L_GRID, &plan).expect("criterion 5");
    put_scaling(t, &s);
    let halved = *s.residuals.last().unwrap() < 0.5 * s.residuals[0];
    (
        s.monotone && halved,
        format!(
            "residuals {:.1e} -> {:.1e}, monotone {}, halved {}",
            s.residuals[0],
            s.residuals.last().unwrap(),
            s.monotone,
            halved
        ),
    )
}

fn criterion_6(t: &mut String) -> (bool, String) {
    let template = ModelParams::new(4, 1, 4, 1.0).with_t(1.0).with_h(0.01).with_sub_set_size(1);
    let plan = SamplingPlan::new(4000, SEED, "c6");
    let s = check_sub_mmse_relation(&prior(), &template, &L_GRID, &plan).expect("criterion 6");
    put_scaling(t, &s);
    let halved = *s.residuals.last().unwrap() < 0.5 * s.residuals[0];
    (
        s.monotone && halved,
        format!(
            "residuals {:.1e} -> {:.1e}, monotone {}, halved {}",
            s.residuals[0],
            s.residuals.last().unwrap(),
            s.monotone,
            halved
        ),
    )
}

fn criterion_7(t: &mut String) -> (bool, String) {
    let template = ModelParams::new(4, 1, 4, 1.0).with_h(0.01).with_sub_set_size(1);
    let plan = SamplingPlan::new(2000, SEED, "c7");
    let s = check_mmse_variation(&prior(), &template, &L_GRID, &plan).expect("criterion 7");
    put_scaling(t, &s);
    let shrank = *s.residuals.last().unwrap() < s.residuals[0];
    (
        s.monotone && shrank,
        format!(
            "paired |E(1) - E(0)| {:.1e} -> {:.1e}, monotone {}",
            s.residuals[0],
            s.residuals.last().unwrap(),
            s.monotone
        ),
    )
}

fn criterion_8(t: &mut String) -> (bool, String) {
    let template = ModelParams::new(8, 1, 8, 1.0);
    let grid = [8, 12, 16];
    let plan_a = SamplingPlan::new(800, SEED, "c8-alpha");
    let (ra, sa) = check_alpha_immse(&prior(), &template, &grid, 1, &plan_a).expect("criterion 8a");
    let plan_l = SamplingPlan::new(800, SEED, "c8-log");
    let (rl, sl) =
        check_log_identity(&prior(), &template, &grid, 0.02, 1, &plan_l).expect("criterion 8b");
    for r in ra.iter().chain(&rl) {
        put_relation(t, r);
    }
    put_scaling(t, &sa);
    put_scaling(t, &sl);
    let at_16 = ra.last().unwrap().pass && rl.last().unwrap().pass;
    let ok = at_16 && sa.pass && sl.pass;
    (
        ok,
        format!(
            "L=16 z: alpha {:.2}, log {:.2}; decay pass: alpha {}, log {}",
            ra.last().unwrap().z_score,
            rl.last().unwrap().z_score,
            sa.pass,
            sl.pass
        ),
    )
}

fn criterion_9(t: &mut String) -> (bool, String) {
    let template = ModelParams::new(4, 1, 4, 1.0).with_sub_set_size(1);
    let plan = SamplingPlan::new(1000, SEED, "c9");
    let s = concentration_scan(&prior(), &template, &L_GRID, (0.05, 0.5), 5, &plan)
        .expect("criterion 9");
    put_scaling(t, &s);
    let ok = s.monotone && s.slope_upper() < 0.0;
    (
        ok,
        format!(
            "integral {:.2e} -> {:.2e}, slope {:.2} +- {:.2}",
            s.residuals[0],
            s.residuals.last().unwrap(),
            s.slope,
            1.96 * s.slope_se
        ),
    )
}

fn criterion_10(t: &mut String) -> (bool, String) {
    let params = desk_params();
    let plan = SamplingPlan::new(2000, SEED, "c10");
    let grid: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
    let report = integrate_path(&prior(), &params, &plan, &grid).expect("criterion 10");
    put_est(t, "path-endpoint-diff", &report.endpoint_diff);
    put_est(t, "path-quadrature", &report.quadrature);
    put_est(t, "path-residual", &report.quadrature_residual);
    writeln!(
        t,
        "path-quadrature-bias {:.16e} closed-form {:.16e} closed-form-res {:.16e}",
        report.quadrature_bias, report.closed_form, report.closed_form_residual
    )
    .unwrap();
    let tol = 4.0 * report.quadrature_residual.std_error + report.quadrature_bias;
    let ok = report.quadrature_residual.mean.abs() <= tol;
    (
        ok,
        format!(
            "reconstruction residual {:.2e} within {:.2e}",
            report.quadrature_residual.mean, tol
        ),
    )
}

fn criterion_11() -> Line {
    let t0 = Instant::now();
    let params = ModelParams::new(16, 1, 8, 1.0).with_t(0.5).with_h(0.01).with_sub_set_size(1);
    let p = prior();
    let inst = sample_instance(&params, &p, StreamKey::new(SEED, 0, 0)).expect("criterion 11");
    let warm = enumerate_posterior(&inst, &p, &params).expect("criterion 11 warmup");
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let tick = Instant::now();
        let run = enumerate_posterior(&inst, &p, &params).expect("criterion 11 run");
        best = best.min(tick.elapsed().as_secs_f64());
        assert_eq!(run.log_z, warm.log_z, "enumeration must be deterministic");
    }
    Line {
        idx: 11,
        name: "enumeration speed",
        ok: best <= 0.050,
        secs: t0.elapsed().as_secs_f64(),
        limit: 10.0,
        detail: format!("L=16, K=2, M=8 in {:.1} ms (limit 50 ms)", best * 1e3),
    }
}

struct MiddleRun {
    lines: Vec<Line>,
    transcript: String,
}

fn run_middle_criteria() -> MiddleRun {
    let mut t = String::new();
    let lines = vec![
        timed(2, "Nishimori suite", 120.0, criterion_2, &mut t),
        timed(3, "canonical information derivative", 120.0, criterion_3, &mut t),
        timed(4, "t-derivative forms", 300.0, criterion_4, &mut t),
        timed(5, "measurement error limit", 1200.0, criterion_5, &mut t),
        timed(6, "sub-group error limit", 1200.0, criterion_6, &mut t),
        timed(7, "error insensitivity to t", 1200.0, criterion_7, &mut t),
        timed(8, "alpha derivative and log identity", 1800.0, criterion_8, &mut t),
        timed(9, "overlap concentration", 1200.0, criterion_9, &mut t),
        timed(10, "path reconstruction", 600.0, criterion_10, &mut t),
    ];
    MiddleRun { lines, transcript: t }
}

fn main() {
    let started = Instant::now();
    let mut verdicts = Vec::new();

    verdicts.push(criterion_1());

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-worker pool")
        .install(run_middle_criteria);
    let eight = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .expect("eight-worker pool")
        .install(run_middle_criteria);

    let identical = single.transcript == eight.transcript;
    verdicts.extend(eight.lines);
    verdicts.push(criterion_11());
    verdicts.push(Line {
        idx: 12,
        name: "worker-count determinism",
        ok: identical,
        secs: 0.0,
        limit: 60.0,
        detail: format!(
            "criteria 2-10 transcripts ({} bytes) {} across 1 and 8 workers",
            eight.transcript.len(),
            if identical { "identical" } else { "differ" }
        ),
    });

    verdicts.sort_by_key(|l| l.idx);
    let mut all = true;
    for line in &verdicts {
        line.print();
        all &= line.verdict();
    }
    println!(
        "acceptance: {} of {} criteria pass in {:.0}s",
        verdicts.iter().filter(|l| l.verdict()).count(),
        verdicts.len(),
        started.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
