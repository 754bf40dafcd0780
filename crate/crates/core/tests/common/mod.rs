//! Reference implementations shared by the integration suites.
//!
//! Everything here is deliberately naive and independent of the library's
//! incremental enumeration: configurations come from a plain odometer, the
//! energy is recomputed from its definition for every configuration, and
//! `log Z` uses a two-pass log-sum-exp over stored log-weights. Slow, simple,
//! and wrong in none of the clever ways the production path could be.

#![allow(dead_code)]

use rle_core::{Instance, ModelParams, Prior};

/// Gibbs averages computed by direct summation, mirroring the fields of the
/// library's posterior summary.
pub struct NaiveSummary {
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub overlap_mean: f64,
    pub overlap_sq: f64,
    pub row_mean: Vec<f64>,
    pub row_sq: Vec<f64>,
    pub section_mmse_term: f64,
    pub sub_cross_mean: Vec<Vec<f64>>,
    pub sub_overlap_cross: Vec<f64>,
    pub sub_sq_overlap_cross: Vec<f64>,
}

/// Log-weight of one configuration: prior log-mass minus the full energy,
/// straight from the model definition.
fn log_weight(inst: &Instance, prior: &Prior, params: &ModelParams, x: &[f64], ln_p0: f64) -> f64 {
    let n = params.n();
    let m = params.m;
    let sub = params.sub_rows();
    let mut energy = 0.0;
    for r in 0..m {
        let row = inst.phi.row(r);
        let rb: f64 = (0..n).map(|i| row[i] * (x[i] - inst.s[i])).sum();
        let z = inst.z[r];
        energy += rb * rb / (2.0 * params.delta) - rb * z / params.delta.sqrt() + z * z / 2.0;
    }
    for v in 0..sub {
        let r = m + v;
        let row = inst.phi.row(r);
        let rb: f64 = (0..n).map(|i| row[i] * (x[i] - inst.s[i])).sum();
        let z = inst.z[r];
        energy += params.t * rb * rb / (2.0 * params.delta)
            - (params.t / params.delta).sqrt() * rb * z
            + z * z / 2.0;
    }
    if params.h > 0.0 {
        for ((&xi, &si), &zh) in x.iter().zip(&inst.s).zip(&inst.zhat) {
            let xb = xi - si;
            energy += params.h / 2.0 * xb * xb - params.h.sqrt() * xb * zh
                + zh * zh / 2.0
                + params.h.sqrt() * prior.s_max() * zh.abs();
        }
    }
    ln_p0 - energy
}

/// Builds the configuration for one odometer state; `digits[j]` is the atom
/// index of section `j`.
fn assemble(prior: &Prior, digits: &[usize], x: &mut [f64]) -> f64 {
    let b = prior.b();
    let mut ln_p0 = 0.0;
    for (j, &d) in digits.iter().enumerate() {
        ln_p0 += prior.weight(d).ln();
        x[j * b..(j + 1) * b].copy_from_slice(prior.atom(d));
    }
    ln_p0
}

/// Direct-summation posterior summary over all `K^L` configurations.
pub fn naive_summary(inst: &Instance, prior: &Prior, params: &ModelParams) -> NaiveSummary {
    let n = params.n();
    let l = params.l;
    let k = prior.k();
    let m = params.m;
    let sub = params.sub_rows();
    let rows = m + sub;
    let total = (k as u64).pow(l as u32) as usize;

    // Pass 1: log-weights of every configuration.
    let mut digits = vec![0usize; l];
    let mut x = vec![0.0; n];
    let mut lws = Vec::with_capacity(total);
    for cfg in 0..total {
        let mut rem = cfg;
        for j in (0..l).rev() {
            digits[j] = rem % k;
            rem /= k;
        }
        let ln_p0 = assemble(prior, &digits, &mut x);
        lws.push(log_weight(inst, prior, params, &x, ln_p0));
    }
    let max_lw = lws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z_sum: f64 = lws.iter().map(|lw| (lw - max_lw).exp()).sum();
    let log_z = max_lw + z_sum.ln();

    // Pass 2: normalized weights against every observable.
    let mut mean = vec![0.0; n];
    let mut mean_sq = vec![0.0; n];
    let mut overlap_mean = 0.0;
    let mut overlap_sq = 0.0;
    let mut row_mean = vec![0.0; rows];
    let mut row_sq = vec![0.0; rows];
    let mut sub_cross_mean = vec![vec![0.0; n]; sub];
    let mut sub_overlap_cross = vec![0.0; sub];
    let mut sub_sq_overlap_cross = vec![0.0; sub];
    for (cfg, lw) in lws.iter().enumerate() {
        let mut rem = cfg;
        for j in (0..l).rev() {
            digits[j] = rem % k;
            rem /= k;
        }
        assemble(prior, &digits, &mut x);
        let wgt = (lw - max_lw).exp() / z_sum;
        let q: f64 = (0..n).map(|i| (x[i] - inst.s[i]) * x[i]).sum::<f64>() / l as f64;
        overlap_mean += wgt * q;
        overlap_sq += wgt * q * q;
        for i in 0..n {
            mean[i] += wgt * x[i];
            mean_sq[i] += wgt * x[i] * x[i];
        }
        for r in 0..rows {
            let row = inst.phi.row(r);
            let rb: f64 = (0..n).map(|i| row[i] * (x[i] - inst.s[i])).sum();
            row_mean[r] += wgt * rb;
            row_sq[r] += wgt * rb * rb;
            if r >= m {
                let v = r - m;
                for i in 0..n {
                    sub_cross_mean[v][i] += wgt * rb * (x[i] - inst.s[i]);
                }
                sub_overlap_cross[v] += wgt * rb * q;
                sub_sq_overlap_cross[v] += wgt * rb * rb * q;
            }
        }
    }
    let section_mmse_term =
        (0..n).map(|i| (inst.s[i] - mean[i]) * (inst.s[i] - mean[i])).sum::<f64>() / l as f64;

    NaiveSummary {
        log_z,
        mean,
        mean_sq,
        overlap_mean,
        overlap_sq,
        row_mean,
        row_sq,
        section_mmse_term,
        sub_cross_mean,
        sub_overlap_cross,
        sub_sq_overlap_cross,
    }
}

/// Gauss-Hermite nodes and weights for `int exp(-u^2) f(u) du`, by Newton
/// iteration on the orthonormal recurrence (largest node first).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..half {
        // Standard starting guesses, outermost root inward.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut deriv = 0.0;
        for _ in 0..100 {
            // Orthonormal Hermite recurrence; p1 is h_n(z).
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            deriv = (2.0 * nf).sqrt() * p2;
            let step = p1 / deriv;
            z -= step;
            if step.abs() <= 3e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (deriv * deriv);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Expectation of `f` under a standard normal via `n`-point Gauss-Hermite.
pub fn normal_expectation(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite(n);
    let scale = std::f64::consts::PI.sqrt().recip();
    nodes.iter().zip(&weights).map(|(&u, &w)| w * f(std::f64::consts::SQRT_2 * u)).sum::<f64>()
        * scale
}

/// Relative gap between two values, with an absolute floor near zero.
pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(rel_gap(a, b) <= tol, "{what}: {a} vs {b} (rel gap {:.3e})", rel_gap(a, b));
}

pub fn assert_slices_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert_close(*x, *y, tol, &format!("{what}[{i}]"));
    }
}
