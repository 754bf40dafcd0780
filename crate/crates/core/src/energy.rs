//! Hamiltonians of the base and interpolating models.
//!
//! With `xbar = x - s` and `rbar = phi * xbar`, the base energy is
//!
//! ```text
//!   H_base(x) = sum_{mu < M} (rbar_mu - z_mu * sqrt(delta))^2 / (2 delta).
//! ```
//!
//! The interpolating energy adds a component-wise Gaussian side channel of
//! strength `h` and gives the `|S|` extra rows weight `t`:
//!
//! ```text
//!   H(x) = sum_i [ h/2 xbar_i^2 - sqrt(h) xbar_i zhat_i + zhat_i^2 / 2 ]
//!        + sqrt(h) s_max sum_i |zhat_i|                     (side, h > 0)
//!        + H_base(x)                                         (M rows)
//!        + sum_nu [ t/(2 delta) rbar_nu^2
//!                   - sqrt(t/delta) rbar_nu z_nu + z_nu^2 / 2 ]   (S rows).
//! ```
//!
//! Every term is written in expanded form so that `t = 0` and `h = 0` are
//! perfectly regular: the `x`-dependent parts carry factors of `t`, `sqrt(t)`,
//! `h`, `sqrt(h)` and simply vanish. The side-channel block (including its
//! constants) is present only for `h > 0`; the `S`-row constants `z_nu^2 / 2`
//! are always present. None of the `x`-independent constants affect the
//! posterior, but they are kept in the energy so that `log Z` comes out in
//! the standard normalization.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::mat::dot;
use crate::params::ModelParams;
use crate::prior::Prior;

fn check_dims(inst: &Instance, params: &ModelParams, x: &[f64], rows_needed: usize) -> Result<()> {
    params.validate()?;
    if x.len() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "x has length {}, expected n = {}",
            x.len(),
            params.n()
        )));
    }
    if inst.n() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "instance has n = {}, params have n = {}",
            inst.n(),
            params.n()
        )));
    }
    if inst.rows() < rows_needed {
        return Err(Error::DimensionMismatch(format!(
            "instance has {} rows, {} required",
            inst.rows(),
            rows_needed
        )));
    }
    Ok(())
}

/// Energy of the base model: the `M` ordinary measurement rows only.
pub fn base_energy(inst: &Instance, params: &ModelParams, x: &[f64]) -> Result<f64> {
    check_dims(inst, params, x, params.m)?;
    let xbar: Vec<f64> = x.iter().zip(&inst.s).map(|(xi, si)| xi - si).collect();
    let half_inv_delta = 0.5 / params.delta;
    let inv_sqrt_delta = 1.0 / params.delta.sqrt();
    let mut e = 0.0;
    for r in 0..params.m {
        let rbar = dot(inst.phi.row(r), &xbar);
        e += half_inv_delta * rbar * rbar - inv_sqrt_delta * rbar * inst.z[r]
            + 0.5 * inst.z[r] * inst.z[r];
    }
    Ok(e)
}

/// Energy of the interpolating model: side channel, base rows, `t`-weighted
/// sub-group rows. The prior enters only through `s_max`, the coefficient of
/// the side channel's absolute-value term.
pub fn interp_energy(
    inst: &Instance,
    prior: &Prior,
    params: &ModelParams,
    x: &[f64],
) -> Result<f64> {
    check_dims(inst, params, x, params.rows())?;
    if prior.b() != params.b {
        return Err(Error::DimensionMismatch(format!(
            "prior section dimension {} != params.b {}",
            prior.b(),
            params.b
        )));
    }
    let xbar: Vec<f64> = x.iter().zip(&inst.s).map(|(xi, si)| xi - si).collect();
    let mut e = base_energy(inst, params, x)?;

    let sub_sq = 0.5 * params.t / params.delta;
    let sub_lin = (params.t / params.delta).sqrt();
    for r in params.m..params.rows() {
        let rbar = dot(inst.phi.row(r), &xbar);
        e += sub_sq * rbar * rbar - sub_lin * rbar * inst.z[r] + 0.5 * inst.z[r] * inst.z[r];
    }

    if params.h > 0.0 {
        let side_sq = 0.5 * params.h;
        let side_lin = params.h.sqrt();
        for (xb, zh) in xbar.iter().zip(&inst.zhat) {
            e += side_sq * xb * xb - side_lin * xb * zh
                + 0.5 * zh * zh
                + side_lin * prior.s_max() * zh.abs();
        }
    }
    Ok(e)
}

/// The `x`-independent part of [`interp_energy`]: row-noise constants plus,
/// for `h > 0`, the side-channel constants. Subtracting it from the energy
/// leaves exactly the terms that shape the posterior.
pub(crate) fn constant_term(inst: &Instance, prior: &Prior, params: &ModelParams) -> f64 {
    let mut c = 0.0;
    for r in 0..params.rows() {
        c += 0.5 * inst.z[r] * inst.z[r];
    }
    if params.h > 0.0 {
        let side_lin = params.h.sqrt();
        for zh in &inst.zhat {
            c += 0.5 * zh * zh + side_lin * prior.s_max() * zh.abs();
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{sample_instance, StreamKey};
    use crate::mat::Mat;

    /// Hand-built instance on given values; the key is a placeholder.
    fn fixed_instance(phi: Mat, s: Vec<f64>, z: Vec<f64>, zhat: Vec<f64>) -> Instance {
        Instance { phi, s, z, zhat, seed: StreamKey::new(0, 0, 0) }
    }

    #[test]
    fn base_energy_single_row_by_hand() {
        // One scalar measurement: phi = 1, s = 0, z = 1, delta = 1, x = 2
        // gives (2 - 1)^2 / 2 = 1/2.
        let inst = fixed_instance(Mat::from_rows(1, 1, vec![1.0]), vec![0.0], vec![1.0], vec![0.0]);
        let params = ModelParams::new(1, 1, 1, 1.0).with_sub_set_size(0);
        assert!((base_energy(&inst, &params, &[2.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn energy_at_truth_is_pure_noise() {
        let params = ModelParams::new(3, 1, 4, 0.7).with_sub_set_size(2);
        let prior = Prior::rademacher();
        let inst = sample_instance(&params, &prior, StreamKey::new(1, 2, 3)).unwrap();
        let z2: f64 = inst.z[..4].iter().map(|z| 0.5 * z * z).sum();
        let e = base_energy(&inst, &params, &inst.s.clone()).unwrap();
        assert!((e - z2).abs() < 1e-12, "base energy at x = s should be sum z^2/2");

        // t = h = 0: the sub rows only contribute their noise constants.
        let zs2: f64 = inst.z.iter().map(|z| 0.5 * z * z).sum();
        let ei = interp_energy(&inst, &prior, &params, &inst.s.clone()).unwrap();
        assert!((ei - zs2).abs() < 1e-12);

        // h > 0 at x = s adds only the side-channel constants.
        let ph = params.clone().with_h(0.09);
        let side: f64 =
            inst.zhat.iter().map(|zh| 0.5 * zh * zh + 0.3 * prior.s_max() * zh.abs()).sum();
        let eh = interp_energy(&inst, &prior, &ph, &inst.s.clone()).unwrap();
        assert!((eh - (zs2 + side)).abs() < 1e-12);
    }

    #[test]
    fn sub_row_term_by_hand() {
        // M = 0, one sub row with phi = 1, s = 0, z = 0, t = 1, delta = 1,
        // x = 1: energy is 1^2 / 2 = 1/2.
        let inst = fixed_instance(Mat::from_rows(1, 1, vec![1.0]), vec![0.0], vec![0.0], vec![0.0]);
        let params = ModelParams::new(1, 1, 0, 1.0).with_sub_set_size(1).with_t(1.0);
        let e = interp_energy(&inst, &Prior::rademacher(), &params, &[1.0]).unwrap();
        assert!((e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interp_minus_base_is_constant_in_x_at_t0_h0() {
        let params = ModelParams::new(2, 1, 3, 1.3).with_sub_set_size(2);
        let prior = Prior::rademacher();
        let inst = sample_instance(&params, &prior, StreamKey::new(5, 0, 1)).unwrap();
        let sub_const: f64 = inst.z[3..].iter().map(|z| 0.5 * z * z).sum();
        for x in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            let d = interp_energy(&inst, &prior, &params, &x).unwrap()
                - base_energy(&inst, &params, &x).unwrap();
            assert!((d - sub_const).abs() < 1e-12);
        }
    }

    /// The energy is affine in the pair (t, sqrt(t)) and in (h, sqrt(h)).
    /// Fit the two coefficients from two anchor values, then predict others.
    #[test]
    fn energy_is_affine_in_t_and_sqrt_t() {
        let base = ModelParams::new(3, 1, 3, 0.8).with_sub_set_size(2);
        let prior = Prior::rademacher();
        let inst = sample_instance(&base, &prior, StreamKey::new(9, 9, 9)).unwrap();
        let x = [1.0, -1.0, -1.0];
        let at = |t: f64| interp_energy(&inst, &prior, &base.clone().with_t(t), &x).unwrap();
        let e0 = at(0.0);
        // e(t) = e0 + c1 t + c2 sqrt(t); fit the coefficients from anchors
        // at t = 1 and t = 1/4:
        //   c1 + c2 = e(1) - e0,   c1/4 + c2/2 = e(1/4) - e0.
        let (d1, d4) = (at(1.0) - e0, at(0.25) - e0);
        let c2 = 4.0 * d4 - d1;
        let c1 = d1 - c2;
        for t in [0.04, 0.49, 0.81] {
            let predicted = e0 + c1 * t + c2 * t.sqrt();
            assert!((at(t) - predicted).abs() < 1e-12 * at(t).abs().max(1.0), "t = {t}");
        }
    }

    #[test]
    fn energy_is_affine_in_h_and_sqrt_h() {
        let base = ModelParams::new(3, 1, 3, 0.8).with_sub_set_size(1).with_t(0.5);
        let prior = Prior::rademacher();
        let inst = sample_instance(&base, &prior, StreamKey::new(4, 4, 4)).unwrap();
        let x = [-1.0, -1.0, 1.0];
        let at = |h: f64| interp_energy(&inst, &prior, &base.clone().with_h(h), &x).unwrap();
        // For h > 0: e(h) = k + c1 h + c2 sqrt(h), where k is the h -> 0+
        // limit: the h = 0 energy plus the switched-on zhat^2/2 constants.
        let zhat_const: f64 = inst.zhat.iter().map(|zh| 0.5 * zh * zh).sum();
        let k = at(0.0) + zhat_const;
        // Fit (c1, c2) from anchors at h = 1 and h = 1/4:
        //   c1 + c2 = e(1) - k,   c1/4 + c2/2 = e(1/4) - k.
        let (d1, d4) = (at(1.0) - k, at(0.25) - k);
        let c2 = 4.0 * d4 - d1;
        let c1 = d1 - c2;
        for h in [0.09, 0.36, 0.64] {
            let predicted = k + c1 * h + c2 * h.sqrt();
            assert!((at(h) - predicted).abs() < 1e-12 * at(h).abs().max(1.0), "h = {h}");
        }
    }

    #[test]
    fn dimension_errors_are_reported() {
        let params = ModelParams::new(2, 1, 2, 1.0).with_sub_set_size(1);
        let prior = Prior::rademacher();
        let inst = sample_instance(&params, &prior, StreamKey::new(0, 0, 0)).unwrap();
        assert!(base_energy(&inst, &params, &[1.0]).is_err());
        let short = ModelParams::new(2, 1, 4, 1.0);
        assert!(base_energy(&inst, &short, &[1.0, 1.0]).is_err());
    }
}
