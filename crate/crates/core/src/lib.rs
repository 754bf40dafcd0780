//! Exact-posterior toolkit for Gaussian random linear estimation with a
//! discrete section prior.
//!
//! The observation model is
//!
//! ```text
//!   y = phi * s + z * sqrt(delta),
//! ```
//!
//! where the signal `s` has `L` sections of `B` components, each section drawn
//! independently from a finite set of `K` weighted atoms, and `phi` is an
//! `M x N` matrix (`N = L * B`) with i.i.d. `N(0, 1/L)` entries. Because the
//! prior support is finite, the posterior can be enumerated exactly for
//! moderate `L`, which makes the usual information-theoretic identities
//! (I-MMSE relations, Nishimori symmetries, interpolation formulas) testable
//! at finite size with nothing but Monte Carlo error.
//!
//! The crate is organized around that idea:
//!
//! * [`prior`], [`params`], [`instance`], [`energy`]: the model itself, plus
//!   a perturbed Hamiltonian with a Gaussian side channel of strength `h` and
//!   a sub-extensive group of measurement rows weighted by `t` in `[0, 1]`.
//! * [`posterior`]: exact enumeration over the `K^L` support in one pass of a
//!   mixed-radix reflected Gray code.
//! * [`quenched`]: seeded, reproducible Monte Carlo over instances (quenched
//!   disorder), with common-random-number coupling across parameter values.
//! * [`interpolation`]: the `t`-derivative of the free entropy in its two
//!   equivalent forms and path integration between `t = 0` and `t = 1`.
//! * [`relations`]: statistical checks of the identities, reported with
//!   explicit error bars and z-scores.

pub mod energy;
pub mod error;
pub mod instance;
pub mod interpolation;
pub mod mat;
pub mod params;
pub mod posterior;
pub mod prior;
pub mod quenched;
pub mod relations;
pub(crate) mod rng;
pub(crate) mod stats;

pub use energy::{base_energy, interp_energy};
pub use error::{Error, Result};
pub use instance::{sample_instance, Instance, StreamKey};
pub use mat::Mat;
pub use params::ModelParams;
pub use posterior::{enumerate_posterior, gray_schedule, GraySchedule, GrayStep, PosteriorSummary};
pub use prior::Prior;
pub use quenched::{EstimateWithError, SamplingPlan};
pub use relations::{RelationReport, ScalingReport, Z_THRESHOLD};
