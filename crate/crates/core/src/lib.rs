//! Two-stage self-exciting point-process models for information cascades.
//!
//! A cascade is treated as a marked point process whose intensity couples
//! a time-varying infection rate (exponential aging with a daily rhythm)
//! to a heavy-tailed reaction-delay kernel over past posts. The two-stage
//! variant splits the history at a correction time, after which the item
//! spreads again as a second story; the single-stage model is the nested
//! special case.
//!
//! The crate provides:
//!
//! - [`model`]: parameter types and pure intensity evaluations;
//! - [`simulate`]: thinning-based synthetic cascade generation and suite
//!   manifests;
//! - [`fit`]: maximum-likelihood fitting with a profile search over the
//!   correction time;
//! - [`forecast`]: Volterra-equation forecasts of future intensity and
//!   cumulative counts;
//! - [`baselines`]: log-linear regression and reinforced Poisson process
//!   comparators;
//! - [`eval`]: train/test benchmark harness and parameter-recovery
//!   experiments;
//! - [`io`]: the text and JSON file formats (see `FORMATS.md`).

pub mod baselines;
pub mod error;
pub mod eval;
pub mod fit;
pub mod forecast;
pub mod io;
pub mod model;
pub mod optim;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    infection_rate, intensity_tideh, intensity_two_stage, memory, tideh_embedding, Cascade,
    CascadeMeta, CircadianParams, Event, KernelParams, Stage, TiDeHParams, TwoStageParams,
};
