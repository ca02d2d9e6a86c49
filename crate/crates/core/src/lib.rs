//! Secure on-off transmission over Rayleigh block-fading wiretap channels
//! with imperfect channel estimates.
//!
//! * [`channel`]: system configuration, estimation statistics and sampling.
//! * [`outage`]: closed-form transmission, connection and secrecy outage.
//! * [`design`]: threshold, rate and pilot-power optimization.
//! * [`mcsim`]: reproducible Monte-Carlo estimators.
//! * [`specfun`] and [`numerics`]: Marcum Q, Lambert W, root finding,
//!   quadrature and scalar maximization.
//!
//! ```
//! use secure_onoff::channel::{Scenario, SystemConfig};
//! use secure_onoff::design::{solve_fixed, OutageConstraints};
//! use secure_onoff::outage::RatePair;
//!
//! let cfg = SystemConfig::from_db(10.0, 0.0, 5.0)?;
//! let sol = solve_fixed(&cfg, Scenario::S1, &RatePair::new(2.0, 1.0)?, &OutageConstraints::new(0.05, 0.1)?)?;
//! assert!(sol.feasibility.feasible && sol.eta() > 0.0);
//! # Ok::<(), secure_onoff::Error>(())
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod design;
pub mod error;
pub mod mcsim;
pub mod numerics;
pub mod outage;
pub mod specfun;

pub use error::{Error, Result};

// Compile and run the guide's code blocks as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/system-model.md")]
    mod system_model {}
    #[doc = include_str!("../../../book/src/outage.md")]
    mod outage {}
    #[doc = include_str!("../../../book/src/threshold-design.md")]
    mod threshold_design {}
    #[doc = include_str!("../../../book/src/joint-design.md")]
    mod joint_design {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
