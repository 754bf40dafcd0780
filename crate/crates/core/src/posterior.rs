//! Exact posterior summaries by enumeration of the `K^L` support.
//!
//! The support of the posterior is the product of the `K` atoms over `L`
//! sections. A mixed-radix reflected Gray code visits all `K^L` configurations
//! changing exactly one section per step, so the row overlaps `phi * (x - s)`
//! can be maintained incrementally in `O((M + |S|) B)` per step instead of
//! recomputed. Weights are handled in log space with a streaming
//! log-sum-exp: a running maximum rescales every weighted accumulator when a
//! heavier configuration appears, so `log Z` stays finite even when `delta`
//! is tiny and the weights span hundreds of orders of magnitude.

use crate::energy;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::mat::dot;
use crate::params::ModelParams;
use crate::prior::Prior;
use crate::stats::Comp;

/// One Gray-code move: `section` switches to `atom` (an index into the
/// prior's atom list, changing by exactly one per step).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrayStep {
    pub section: usize,
    pub atom: usize,
}

/// Iterator over the `K^L - 1` transitions of a mixed-radix reflected Gray
/// code. The last section varies fastest. Constructed via [`gray_schedule`].
#[derive(Clone, Debug)]
pub struct GraySchedule {
    k: usize,
    l: usize,
    a: Vec<usize>,
    dir: Vec<i8>,
    focus: Vec<usize>,
    emitted: u128,
    steps: u128,
}

/// Builds the Gray visit schedule for `K` atoms over `L` sections, refusing
/// to start if the number of weighted states `K^L` exceeds `budget`.
pub fn gray_schedule(k: usize, l: usize, budget: u64) -> Result<GraySchedule> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidArgument("gray_schedule requires k >= 1 and l >= 1".into()));
    }
    let states = (k as u128)
        .checked_pow(l as u32)
        .ok_or(Error::BudgetExceeded { states: u128::MAX, budget })?;
    if states > budget as u128 {
        return Err(Error::BudgetExceeded { states, budget });
    }
    Ok(GraySchedule {
        k,
        l,
        a: vec![0; l],
        dir: vec![1; l],
        focus: (0..=l).collect(),
        emitted: 0,
        steps: states - 1,
    })
}

impl GraySchedule {
    /// Number of configurations the schedule visits, `K^L`.
    pub fn states(&self) -> u128 {
        self.steps + 1
    }

    /// Number of transitions, `K^L - 1`.
    pub fn steps(&self) -> u128 {
        self.steps
    }
}

impl Iterator for GraySchedule {
    type Item = GrayStep;

    fn next(&mut self) -> Option<GrayStep> {
        if self.emitted == self.steps {
            return None;
        }
        // Loopless odometer with focus pointers; digit 0 moves most often.
        let j = self.focus[0];
        self.focus[0] = 0;
        debug_assert!(j < self.l);
        if self.dir[j] > 0 {
            self.a[j] += 1;
        } else {
            self.a[j] -= 1;
        }
        if self.a[j] == 0 || self.a[j] == self.k - 1 {
            self.dir[j] = -self.dir[j];
            self.focus[j] = self.focus[j + 1];
            self.focus[j + 1] = j + 1;
        }
        self.emitted += 1;
        // Map digit j to a section so that the last section varies fastest.
        Some(GrayStep { section: self.l - 1 - j, atom: self.a[j] })
    }
}

/// Exact Gibbs averages of one instance at one parameter point.
///
/// `mean`, `mean_sq` are component-wise posterior moments of `X`;
/// `row_mean[r]`, `row_sq[r]` are moments of the row overlap
/// `[phi (X - s)]_r` for every matrix row (ordinary rows first, then the
/// sub-group); `overlap_*` are moments of the normalized overlap
/// `q(X) = sum_i (X_i - s_i) X_i / L`. The `sub_*` fields are joint moments
/// involving the sub-group rows, needed by the identity checks.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    /// `ln Z` of the interpolating model, constants included.
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub overlap_mean: f64,
    pub overlap_sq: f64,
    pub row_mean: Vec<f64>,
    pub row_sq: Vec<f64>,
    /// `|s - mean|^2 / L`: the per-section squared estimation error.
    pub section_mmse_term: f64,
    /// `< [phi Xbar]_nu * Xbar_i >`, one row per sub-group row.
    pub sub_cross_mean: Vec<Vec<f64>>,
    /// `< [phi Xbar]_nu * q(X) >` per sub-group row.
    pub sub_overlap_cross: Vec<f64>,
    /// `< [phi Xbar]_nu^2 * q(X) >` per sub-group row.
    pub sub_sq_overlap_cross: Vec<f64>,
}

/// Configuration walker: the current state of the Gray pass plus every cache
/// needed to produce a configuration's log-weight in `O(M + |S|)`.
struct Walker<'a> {
    inst: &'a Instance,
    prior: &'a Prior,
    n: usize,
    b: usize,
    l: f64,
    m: usize,
    rows: usize,
    /// `phi` restricted to the active rows, column-major: entry `(r, i)` at
    /// `i * rows + r`, so a one-component update scans contiguously.
    phi_cols: Vec<f64>,
    atom_idx: Vec<usize>,
    x: Vec<f64>,
    xbar: Vec<f64>,
    /// Row overlaps `[phi (x - s)]_r`, maintained incrementally.
    rbar: Vec<f64>,
    /// `sum_i xbar_i^2` and `sum_i xbar_i zhat_i` for the side channel.
    side_sq: f64,
    side_dot: f64,
    /// `sum_i (x_i^2 - s_i x_i)`; the overlap is this over `L`.
    overlap_num: f64,
    ln_p0: f64,
    c_base_sq: f64,
    c_base_lin: f64,
    c_sub_sq: f64,
    c_sub_lin: f64,
    c_side_sq: f64,
    c_side_lin: f64,
}

impl<'a> Walker<'a> {
    fn new(inst: &'a Instance, prior: &'a Prior, params: &ModelParams) -> Self {
        let n = params.n();
        let rows = params.rows();
        let mut phi_cols = vec![0.0; n * rows];
        for r in 0..rows {
            let row = inst.phi.row(r);
            for i in 0..n {
                phi_cols[i * rows + r] = row[i];
            }
        }
        let atom0 = prior.atom(0);
        let x: Vec<f64> = (0..n).map(|i| atom0[i % params.b]).collect();
        let xbar: Vec<f64> = x.iter().zip(&inst.s).map(|(xi, si)| xi - si).collect();
        let rbar: Vec<f64> = (0..rows).map(|r| dot(&inst.phi.row(r)[..n], &xbar)).collect();
        let side_sq = xbar.iter().map(|v| v * v).sum();
        let side_dot = xbar.iter().zip(&inst.zhat).map(|(v, zh)| v * zh).sum();
        let overlap_num = x.iter().zip(&inst.s).map(|(xi, si)| xi * xi - si * xi).sum();
        let ln_p0 = params.l as f64 * prior.ln_weight(0);
        Walker {
            inst,
            prior,
            n,
            b: params.b,
            l: params.l as f64,
            m: params.m,
            rows,
            phi_cols,
            atom_idx: vec![0; params.l],
            x,
            xbar,
            rbar,
            side_sq,
            side_dot,
            overlap_num,
            ln_p0,
            c_base_sq: 0.5 / params.delta,
            c_base_lin: 1.0 / params.delta.sqrt(),
            c_sub_sq: 0.5 * params.t / params.delta,
            c_sub_lin: (params.t / params.delta).sqrt(),
            c_side_sq: 0.5 * params.h,
            c_side_lin: params.h.sqrt(),
        }
    }

    /// Applies one Gray move, updating all caches in `O((M + |S|) B)`.
    fn apply(&mut self, step: GrayStep) {
        let sec = step.section;
        let old = self.atom_idx[sec];
        let new = step.atom;
        let atom_new = self.prior.atom(new);
        for (j, &x_new) in atom_new.iter().enumerate() {
            let i = sec * self.b + j;
            let x_old = self.x[i];
            let dx = x_new - x_old;
            if dx != 0.0 {
                let col = &self.phi_cols[i * self.rows..(i + 1) * self.rows];
                for (rb, phi) in self.rbar.iter_mut().zip(col) {
                    *rb += phi * dx;
                }
            }
            let s_i = self.inst.s[i];
            let xb_old = self.xbar[i];
            let xb_new = x_new - s_i;
            self.side_sq += xb_new * xb_new - xb_old * xb_old;
            self.side_dot += (xb_new - xb_old) * self.inst.zhat[i];
            self.overlap_num += (x_new * x_new - s_i * x_new) - (x_old * x_old - s_i * x_old);
            self.x[i] = x_new;
            self.xbar[i] = xb_new;
        }
        self.ln_p0 += self.prior.ln_weight(new) - self.prior.ln_weight(old);
        self.atom_idx[sec] = new;
    }

    /// The `x`-dependent part of the interpolating energy, from the caches.
    fn xdep_energy(&self) -> f64 {
        let mut e = self.c_side_sq * self.side_sq - self.c_side_lin * self.side_dot;
        for r in 0..self.m {
            let rb = self.rbar[r];
            e += rb * (self.c_base_sq * rb - self.c_base_lin * self.inst.z[r]);
        }
        for r in self.m..self.rows {
            let rb = self.rbar[r];
            e += rb * (self.c_sub_sq * rb - self.c_sub_lin * self.inst.z[r]);
        }
        e
    }

    #[inline]
    fn ln_weight(&self) -> f64 {
        self.ln_p0 - self.xdep_energy()
    }

    fn overlap(&self) -> f64 {
        self.overlap_num / self.l
    }
}

/// Weighted accumulators for the streaming pass. All sums are compensated
/// and rescaled together when the running maximum log-weight moves.
struct Accums {
    w: Comp,
    mean: Vec<Comp>,
    mean_sq: Vec<Comp>,
    ov1: Comp,
    ov2: Comp,
    row1: Vec<Comp>,
    row2: Vec<Comp>,
    cross: Vec<Comp>,
    cross_ov: Vec<Comp>,
    cross_sq_ov: Vec<Comp>,
}

impl Accums {
    fn new(n: usize, rows: usize, sub: usize) -> Self {
        Accums {
            w: Comp::default(),
            mean: vec![Comp::default(); n],
            mean_sq: vec![Comp::default(); n],
            ov1: Comp::default(),
            ov2: Comp::default(),
            row1: vec![Comp::default(); rows],
            row2: vec![Comp::default(); rows],
            cross: vec![Comp::default(); sub * n],
            cross_ov: vec![Comp::default(); sub],
            cross_sq_ov: vec![Comp::default(); sub],
        }
    }

    fn rescale(&mut self, f: f64) {
        self.w.scale(f);
        for a in self
            .mean
            .iter_mut()
            .chain(self.mean_sq.iter_mut())
            .chain(self.row1.iter_mut())
            .chain(self.row2.iter_mut())
            .chain(self.cross.iter_mut())
            .chain(self.cross_ov.iter_mut())
            .chain(self.cross_sq_ov.iter_mut())
        {
            a.scale(f);
        }
        self.ov1.scale(f);
        self.ov2.scale(f);
    }

    fn visit(&mut self, w: f64, walker: &Walker<'_>, m: usize, sub: usize) {
        self.w.add(w);
        for i in 0..walker.n {
            let xi = walker.x[i];
            self.mean[i].add(w * xi);
            self.mean_sq[i].add(w * xi * xi);
        }
        let q = walker.overlap();
        self.ov1.add(w * q);
        self.ov2.add(w * q * q);
        for r in 0..walker.rows {
            let rb = walker.rbar[r];
            self.row1[r].add(w * rb);
            self.row2[r].add(w * rb * rb);
        }
        for v in 0..sub {
            let rb = walker.rbar[m + v];
            self.cross_ov[v].add(w * rb * q);
            self.cross_sq_ov[v].add(w * rb * rb * q);
            let base = v * walker.n;
            for i in 0..walker.n {
                self.cross[base + i].add(w * rb * walker.xbar[i]);
            }
        }
    }
}

/// Enumerates the posterior of `inst` at `params` exactly, in one Gray pass.
///
/// The instance may carry more rows than `params` asks for: the first
/// `params.m` rows are the ordinary measurements and the following
/// `params.sub_rows()` rows form the sub-group; any further rows are ignored.
/// That convention lets nested-row comparisons reuse one instance.
pub fn enumerate_posterior(
    inst: &Instance,
    prior: &Prior,
    params: &ModelParams,
) -> Result<PosteriorSummary> {
    params.validate()?;
    if prior.b() != params.b {
        return Err(Error::DimensionMismatch(format!(
            "prior section dimension {} != params.b {}",
            prior.b(),
            params.b
        )));
    }
    if inst.n() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "instance has n = {}, params have n = {}",
            inst.n(),
            params.n()
        )));
    }
    if inst.rows() < params.rows() {
        return Err(Error::DimensionMismatch(format!(
            "instance has {} rows, {} required",
            inst.rows(),
            params.rows()
        )));
    }
    let schedule = gray_schedule(prior.k(), params.l, params.enum_budget)?;

    let n = params.n();
    let m = params.m;
    let rows = params.rows();
    let sub = params.sub_rows();
    let mut walker = Walker::new(inst, prior, params);
    let mut acc = Accums::new(n, rows, sub);

    let mut max_lw = walker.ln_weight();
    acc.visit(1.0, &walker, m, sub);
    for step in schedule {
        walker.apply(step);
        let lw = walker.ln_weight();
        let w = if lw <= max_lw {
            (lw - max_lw).exp()
        } else {
            acc.rescale((max_lw - lw).exp());
            max_lw = lw;
            1.0
        };
        acc.visit(w, &walker, m, sub);
    }

    let z = acc.w.value();
    let inv = 1.0 / z;
    let ln_w = max_lw + z.ln();

    let mean: Vec<f64> = acc.mean.iter().map(|a| a.value() * inv).collect();
    let mean_sq: Vec<f64> = acc.mean_sq.iter().map(|a| a.value() * inv).collect();
    let row_mean: Vec<f64> = acc.row1.iter().map(|a| a.value() * inv).collect();
    let row_sq: Vec<f64> = acc.row2.iter().map(|a| a.value() * inv).collect();
    let sub_cross_mean: Vec<Vec<f64>> = (0..sub)
        .map(|v| acc.cross[v * n..(v + 1) * n].iter().map(|a| a.value() * inv).collect())
        .collect();
    let sub_overlap_cross: Vec<f64> = acc.cross_ov.iter().map(|a| a.value() * inv).collect();
    let sub_sq_overlap_cross: Vec<f64> = acc.cross_sq_ov.iter().map(|a| a.value() * inv).collect();
    let section_mmse_term =
        inst.s.iter().zip(&mean).map(|(si, mi)| (si - mi) * (si - mi)).sum::<f64>()
            / params.l as f64;

    Ok(PosteriorSummary {
        log_z: ln_w - energy::constant_term(inst, prior, params),
        mean,
        mean_sq,
        overlap_mean: acc.ov1.value() * inv,
        overlap_sq: acc.ov2.value() * inv,
        row_mean,
        row_sq,
        section_mmse_term,
        sub_cross_mean,
        sub_overlap_cross,
        sub_sq_overlap_cross,
    })
}
