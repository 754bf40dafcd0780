//! Deterministic output rendering. All rows are collected in execution
//! order and written once at the end by a single writer, so the files are
//! byte-identical for a fixed config regardless of the worker count.

use std::fmt::Write as _;

use rle_core::{
    EstimateWithError, ModelParams, RelationReport, SamplingPlan, ScalingReport, Z_THRESHOLD,
};

pub const CSV_HEADER: &str = "task,relation,L,B,M,delta,t,h,sub_set_size,lhs_mean,lhs_se,\
rhs_mean,rhs_se,residual,combined_error,z_score,pass,n_samples,base_seed";

/// One results.csv row. Gated rows feed the process exit code; estimate
/// rows carry `pass = true`, zero residual and zero z-score by convention.
struct CsvRow {
    relation: String,
    l: usize,
    b: usize,
    m: usize,
    delta: f64,
    t: f64,
    h: f64,
    sub_rows: usize,
    lhs_mean: f64,
    lhs_se: f64,
    rhs_mean: f64,
    rhs_se: f64,
    residual: f64,
    combined_error: f64,
    z_score: f64,
    pass: bool,
    n_samples: usize,
    base_seed: u64,
}

impl CsvRow {
    fn render(&self, task: &str, out: &mut String) {
        debug_assert!(!self.relation.contains(','));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},\
             {:.16e},{:.16e},{:.16e},{},{},{}",
            task,
            self.relation,
            self.l,
            self.b,
            self.m,
            self.delta,
            self.t,
            self.h,
            self.sub_rows,
            self.lhs_mean,
            self.lhs_se,
            self.rhs_mean,
            self.rhs_se,
            self.residual,
            self.combined_error,
            self.z_score,
            self.pass,
            self.n_samples,
            self.base_seed,
        );
    }
}

/// Collects rows and report lines as a task runs, tracking the verdict of
/// every gated check.
pub struct OutputBuilder {
    task: &'static str,
    fault_offset: f64,
    rows: Vec<CsvRow>,
    result_lines: Vec<String>,
    skipped: Vec<String>,
    warnings: Vec<String>,
    gated: usize,
    passed: usize,
}

impl OutputBuilder {
    pub fn new(task: &'static str, fault_offset: f64) -> Self {
        OutputBuilder {
            task,
            fault_offset,
            rows: Vec::new(),
            result_lines: Vec::new(),
            skipped: Vec::new(),
            warnings: Vec::new(),
            gated: 0,
            passed: 0,
        }
    }

    /// Records a gated identity check. The fault-injection offset, when
    /// set, is applied here and nowhere else.
    pub fn relation(&mut self, report: &RelationReport) {
        let report = inject_fault(report, self.fault_offset);
        self.rows.push(CsvRow {
            relation: report.name.clone(),
            l: report.params.l,
            b: report.params.b,
            m: report.params.m,
            delta: report.params.delta,
            t: report.params.t,
            h: report.params.h,
            sub_rows: report.params.sub_rows(),
            lhs_mean: report.lhs.mean,
            lhs_se: report.lhs.std_error,
            rhs_mean: report.rhs.mean,
            rhs_se: report.rhs.std_error,
            residual: report.residual,
            combined_error: report.combined_error,
            z_score: report.z_score,
            pass: report.pass,
            n_samples: report.plan.n_samples,
            base_seed: report.plan.base_seed,
        });
        self.result_lines.push(format!(
            "[{}] {}: residual {:+.3e}, error {:.3e}, z {:+.2}",
            verdict(report.pass),
            report.name,
            report.residual,
            report.combined_error,
            report.z_score,
        ));
        for note in &report.notes {
            self.result_lines.push(format!("       note: {note}"));
        }
        self.gated += 1;
        self.passed += report.pass as usize;
    }

    /// Records a plain estimate: not a check, always passes.
    pub fn estimate(&mut self, name: &str, params: &ModelParams, est: EstimateWithError) {
        self.rows.push(CsvRow {
            relation: name.into(),
            l: params.l,
            b: params.b,
            m: params.m,
            delta: params.delta,
            t: params.t,
            h: params.h,
            sub_rows: params.sub_rows(),
            lhs_mean: est.mean,
            lhs_se: est.std_error,
            rhs_mean: 0.0,
            rhs_se: 0.0,
            residual: 0.0,
            combined_error: est.std_error,
            z_score: 0.0,
            pass: true,
            n_samples: est.n_samples,
            base_seed: est.base_seed,
        });
        self.result_lines
            .push(format!("[est ] {}: {:+.6e} +- {:.3e}", name, est.mean, est.std_error));
    }

    /// Records an ungated comparison: the residual is reported for
    /// downstream analysis but carries no verdict.
    #[allow(clippy::too_many_arguments)]
    pub fn ungated(
        &mut self,
        name: &str,
        params: &ModelParams,
        plan: &SamplingPlan,
        lhs: EstimateWithError,
        rhs: EstimateWithError,
        residual: f64,
        note: &str,
    ) {
        self.rows.push(CsvRow {
            relation: name.into(),
            l: params.l,
            b: params.b,
            m: params.m,
            delta: params.delta,
            t: params.t,
            h: params.h,
            sub_rows: params.sub_rows(),
            lhs_mean: lhs.mean,
            lhs_se: lhs.std_error,
            rhs_mean: rhs.mean,
            rhs_se: rhs.std_error,
            residual,
            combined_error: (lhs.std_error * lhs.std_error + rhs.std_error * rhs.std_error).sqrt(),
            z_score: 0.0,
            pass: true,
            n_samples: plan.n_samples,
            base_seed: plan.base_seed,
        });
        self.result_lines
            .push(format!("[info] {}: residual {:+.3e} (ungated; {})", name, residual, note));
    }

    /// Records a size-decay check: one row per grid size, all carrying the
    /// grid verdict. `per_size_params` must align with `report.sizes`.
    pub fn scaling(
        &mut self,
        report: &ScalingReport,
        per_size_params: &[ModelParams],
        plan: &SamplingPlan,
    ) {
        assert_eq!(per_size_params.len(), report.sizes.len());
        for (i, params) in per_size_params.iter().enumerate() {
            self.rows.push(CsvRow {
                relation: report.name.clone(),
                l: report.sizes[i],
                b: params.b,
                m: params.m,
                delta: params.delta,
                t: params.t,
                h: params.h,
                sub_rows: params.sub_rows(),
                lhs_mean: report.residuals[i],
                lhs_se: report.errors[i],
                rhs_mean: 0.0,
                rhs_se: 0.0,
                residual: report.residuals[i],
                combined_error: report.errors[i],
                z_score: if report.residuals[i] == 0.0 {
                    0.0
                } else {
                    report.residuals[i] / report.errors[i]
                },
                pass: report.pass,
                n_samples: plan.n_samples,
                base_seed: plan.base_seed,
            });
        }
        self.result_lines.push(format!(
            "[{}] {}: residuals {:.3e} -> {:.3e}, slope {:+.2} +- {:.2}, monotone={}",
            verdict(report.pass),
            report.name,
            report.residuals.first().copied().unwrap_or(f64::NAN),
            report.residuals.last().copied().unwrap_or(f64::NAN),
            report.slope,
            report.slope_se,
            report.monotone,
        ));
        for note in &report.notes {
            self.result_lines.push(format!("       note: {note}"));
        }
        self.gated += 1;
        self.passed += report.pass as usize;
    }

    pub fn skip(&mut self, name: &str, why: &str) {
        self.skipped.push(format!("{name}: {why}"));
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    pub fn all_pass(&self) -> bool {
        self.passed == self.gated
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            row.render(self.task, &mut out);
        }
        out
    }

    /// Renders report.txt; `preamble` describes the run (task, prior,
    /// model, plan) and is produced by the caller.
    pub fn render_report(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "\nresults:");
        for line in &self.result_lines {
            let _ = writeln!(out, "  {line}");
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "\nskipped:");
            for line in &self.skipped {
                let _ = writeln!(out, "  - {line}");
            }
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "\nwarnings:");
            for line in &self.warnings {
                let _ = writeln!(out, "  - {line}");
            }
        }
        let _ = writeln!(out, "\nsummary: {} of {} gated checks pass", self.passed, self.gated);
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Shifts a report's left side by the configured offset and rescores it,
/// leaving everything else untouched. A no-op at offset zero.
fn inject_fault(report: &RelationReport, offset: f64) -> RelationReport {
    if offset == 0.0 {
        return report.clone();
    }
    let mut r = report.clone();
    r.lhs.mean += offset;
    r.residual += offset;
    r.z_score = if r.residual == 0.0 { 0.0 } else { r.residual / r.combined_error };
    r.pass = if r.one_sided { r.z_score <= Z_THRESHOLD } else { r.z_score.abs() <= Z_THRESHOLD };
    r.notes.push(format!("fault injection: left side shifted by {offset:e}"));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, se: f64) -> EstimateWithError {
        EstimateWithError { mean, std_error: se, n_samples: 10, base_seed: 7 }
    }

    fn sample_report(pass_margin: f64) -> RelationReport {
        RelationReport::two_sided(
            "demo",
            &ModelParams::new(4, 1, 4, 1.0),
            &SamplingPlan::new(10, 7, "t"),
            est(pass_margin, 0.1),
            est(0.0, 0.1),
            0.0,
        )
    }

    #[test]
    fn csv_floats_carry_seventeen_significant_digits() {
        let mut out = OutputBuilder::new("verify", 0.0);
        out.estimate("demo", &ModelParams::new(4, 1, 4, 1.0), est(1.0, 0.25));
        let csv = out.render_csv();
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains("1.0000000000000000e0"));
        assert!(row.contains("2.5000000000000000e-1"));
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn fault_injection_flips_a_passing_report() {
        let report = sample_report(0.1);
        assert!(report.pass);

        let mut clean = OutputBuilder::new("verify", 0.0);
        clean.relation(&report);
        assert!(clean.all_pass());

        let mut faulty = OutputBuilder::new("verify", 10.0);
        faulty.relation(&report);
        assert!(!faulty.all_pass());
        assert!(faulty.render_csv().contains("false"));
        assert!(faulty.render_report(&[]).contains("fault injection"));
    }

    #[test]
    fn estimates_do_not_gate_the_verdict() {
        let mut out = OutputBuilder::new("verify", 0.0);
        out.estimate("demo", &ModelParams::new(4, 1, 4, 1.0), est(123.0, 1.0));
        assert!(out.all_pass());
        assert_eq!(out.gated, 0);
    }

    #[test]
    fn report_lists_skips_and_warnings() {
        let mut out = OutputBuilder::new("verify", 0.0);
        out.relation(&sample_report(0.0));
        out.skip("canonical-immse", "requires t = 0 and h = 0");
        out.warn("grid is coarse".into());
        let text = out.render_report(&["task: verify".into()]);
        assert!(text.contains("skipped:\n  - canonical-immse"));
        assert!(text.contains("warnings:\n  - grid is coarse"));
        assert!(text.contains("summary: 1 of 1 gated checks pass"));
    }
}
