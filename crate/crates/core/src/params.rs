//! Model dimensions and channel parameters for one experiment point.

use crate::error::{Error, Result};

/// Default exponent for the size of the sub-extensive measurement group.
/// Kept deliberately small so the group stays negligible next to `M`.
pub const DEFAULT_SUB_EXPONENT: f64 = 0.04;

/// Default cap on the number of weighted states an exact enumeration may
/// visit (`K^L`). Callers can raise it explicitly when they know better.
pub const DEFAULT_ENUM_BUDGET: u64 = 1 << 26;

/// Dimensions and knobs of one model point.
///
/// The signal has `L` sections of `B` components (`N = L * B`); `phi` has `M`
/// ordinary measurement rows plus a sub-extensive group of `|S|` extra rows.
/// `delta` is the noise variance of the ordinary rows. The extra rows enter
/// the posterior with weight `t` in `[0, 1]`, and `h >= 0` is the strength of
/// a component-wise Gaussian side channel on the signal.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub l: usize,
    pub b: usize,
    pub m: usize,
    pub delta: f64,
    pub t: f64,
    pub h: f64,
    /// Exponent behind the default sub-group size `max(1, floor(M^u))`.
    pub u: f64,
    /// Explicit override for `|S|`; `None` applies the default rule.
    pub sub_set_size: Option<usize>,
    /// Cap on `K^L` for exact enumeration.
    pub enum_budget: u64,
}

impl ModelParams {
    pub fn new(l: usize, b: usize, m: usize, delta: f64) -> Self {
        Self {
            l,
            b,
            m,
            delta,
            t: 0.0,
            h: 0.0,
            u: DEFAULT_SUB_EXPONENT,
            sub_set_size: None,
            enum_budget: DEFAULT_ENUM_BUDGET,
        }
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_u(mut self, u: f64) -> Self {
        self.u = u;
        self
    }

    pub fn with_sub_set_size(mut self, s: usize) -> Self {
        self.sub_set_size = Some(s);
        self
    }

    pub fn with_enum_budget(mut self, budget: u64) -> Self {
        self.enum_budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.b == 0 {
            return Err(Error::InvalidParams("l and b must be >= 1".into()));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !self.t.is_finite() || !(0.0..=1.0).contains(&self.t) {
            return Err(Error::InvalidParams(format!("t must lie in [0, 1], got {}", self.t)));
        }
        if !self.h.is_finite() || self.h < 0.0 {
            return Err(Error::InvalidParams(format!("h must be >= 0, got {}", self.h)));
        }
        if !self.u.is_finite() || self.u <= 0.0 || self.u >= 1.0 {
            return Err(Error::InvalidParams(format!("u must lie in (0, 1), got {}", self.u)));
        }
        if self.enum_budget == 0 {
            return Err(Error::InvalidParams("enum_budget must be >= 1".into()));
        }
        Ok(())
    }

    /// Total signal dimension `N = L * B`.
    pub fn n(&self) -> usize {
        self.l * self.b
    }

    /// Measurement rate `alpha = M / N`.
    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n() as f64
    }

    /// Size of the sub-extensive row group: the explicit override if set,
    /// otherwise `max(1, floor(M^u))`.
    pub fn sub_rows(&self) -> usize {
        match self.sub_set_size {
            Some(s) => s,
            None => ((self.m as f64).powf(self.u).floor() as usize).max(1),
        }
    }

    /// Total number of matrix rows, `M + |S|`.
    pub fn rows(&self) -> usize {
        self.m + self.sub_rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sub_group_size() {
        let p = ModelParams::new(8, 1, 100, 1.0);
        assert!((100f64.powf(p.u) - 1.202).abs() < 1e-3);
        assert_eq!(p.sub_rows(), 1);
        assert_eq!(ModelParams::new(8, 1, 0, 1.0).sub_rows(), 1);
        let wide = ModelParams::new(8, 1, 1_000_000, 1.0).with_u(0.5);
        assert_eq!(wide.sub_rows(), 1000);
    }

    #[test]
    fn explicit_override_wins() {
        let p = ModelParams::new(8, 1, 100, 1.0).with_sub_set_size(0);
        assert_eq!(p.sub_rows(), 0);
        assert_eq!(p.rows(), 100);
    }

    #[test]
    fn alpha_and_n() {
        let p = ModelParams::new(4, 2, 16, 0.5);
        assert_eq!(p.n(), 8);
        assert!((p.alpha() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_knobs() {
        assert!(ModelParams::new(0, 1, 4, 1.0).validate().is_err());
        assert!(ModelParams::new(4, 1, 4, 0.0).validate().is_err());
        assert!(ModelParams::new(4, 1, 4, 1.0).with_t(1.5).validate().is_err());
        assert!(ModelParams::new(4, 1, 4, 1.0).with_h(-0.1).validate().is_err());
        assert!(ModelParams::new(4, 1, 4, 1.0).with_u(1.0).validate().is_err());
        assert!(ModelParams::new(4, 1, 4, 1.0).validate().is_ok());
    }
}
