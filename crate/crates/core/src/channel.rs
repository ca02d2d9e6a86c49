//! Physical setup and channel-estimation statistics.
//!
//! All SNR quantities are linear. Each estimated or error SNR component is
//! exponentially distributed; this module derives their means from the
//! configuration and draws block realizations for the Monte-Carlo oracle.

use crate::error::{domain, Error, Result};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Converts a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear value to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Average SNRs, pilot power and overhead of the link.
///
/// `alpha = f64::INFINITY` is accepted and models perfect channel estimation
/// (zero error variance at both receivers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Average data SNR at Bob (linear).
    pub pb: f64,
    /// Average data SNR at Eve (linear).
    pub pe: f64,
    /// Pilot-to-data power ratio.
    pub alpha: f64,
    /// Pilot length in symbols.
    pub pilot_len: u32,
    /// Pilot and feedback time relative to data time.
    pub theta: f64,
}

impl SystemConfig {
    pub fn new(pb: f64, pe: f64, alpha: f64) -> Result<Self> {
        let cfg = Self { pb, pe, alpha, pilot_len: 1, theta: 0.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a configuration from SNRs given in dB.
    pub fn from_db(pb_db: f64, pe_db: f64, alpha: f64) -> Result<Self> {
        Self::new(db_to_linear(pb_db), db_to_linear(pe_db), alpha)
    }

    pub fn with_pilot_len(mut self, pilot_len: u32) -> Result<Self> {
        self.pilot_len = pilot_len;
        self.validate()?;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64, allow_inf: bool| {
            if v > 0.0 && (allow_inf || v.is_finite()) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("P_b", self.pb, false)?;
        positive("P_e", self.pe, false)?;
        positive("alpha", self.alpha, true)?;
        if self.pilot_len < 1 {
            return Err(Error::Config("pilot length must be at least 1".into()));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!("theta must be finite and >= 0, got {}", self.theta)));
        }
        Ok(())
    }

    /// Throughput discount for pilot and feedback overhead.
    pub fn overhead_factor(&self) -> f64 {
        1.0 / (1.0 + self.theta)
    }
}

/// Variance of the MMSE channel-estimation error, `1 / (1 + alpha P T_t)`.
pub fn estimation_error_variance(p: f64, alpha: f64, pilot_len: u32) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) || !(alpha > 0.0) || pilot_len < 1 {
        return Err(domain(
            "estimation_error_variance",
            format!("need P > 0, alpha > 0, T_t >= 1 (got {p}, {alpha}, {pilot_len})"),
        ));
    }
    Ok(1.0 / (1.0 + alpha * p * pilot_len as f64))
}

/// Error variances and the means of the exponential SNR components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationStats {
    pub pb: f64,
    pub pe: f64,
    pub beta_b: f64,
    pub beta_e: f64,
    /// Mean of Bob's estimated SNR, `P_b (1 - beta_b)`.
    pub mean_gb_hat: f64,
    /// Mean of Bob's error SNR, `P_b beta_b`.
    pub mean_gb_tilde: f64,
    pub mean_ge_hat: f64,
    pub mean_ge_tilde: f64,
    /// Mean of Eve's SNR when she knows her channel perfectly.
    pub mean_ge: f64,
}

/// Derives [`EstimationStats`] from a configuration.
pub fn snr_stats(cfg: &SystemConfig) -> Result<EstimationStats> {
    cfg.validate()?;
    let beta_b = estimation_error_variance(cfg.pb, cfg.alpha, cfg.pilot_len)?;
    let beta_e = estimation_error_variance(cfg.pe, cfg.alpha, cfg.pilot_len)?;
    let mean_gb_tilde = cfg.pb * beta_b;
    let mean_ge_tilde = cfg.pe * beta_e;
    Ok(EstimationStats {
        pb: cfg.pb,
        pe: cfg.pe,
        beta_b,
        beta_e,
        // Written as a difference so the orthogonality identity is exact.
        mean_gb_hat: cfg.pb - mean_gb_tilde,
        mean_gb_tilde,
        mean_ge_hat: cfg.pe - mean_ge_tilde,
        mean_ge_tilde,
        mean_ge: cfg.pe,
    })
}

/// Actual detection SNR given the estimated and error components.
pub fn actual_snr(g_hat: f64, g_tilde: f64) -> f64 {
    g_hat / (g_tilde + 1.0)
}

/// Eavesdropper knowledge model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Eve feeds back her estimate and decodes with imperfect CSI.
    S1,
    /// Eve feeds back her estimate but knows her channel perfectly.
    S2,
    /// No feedback from Eve; she knows her channel perfectly.
    S3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::S1, Scenario::S2, Scenario::S3];

    /// Whether the transmitter can gate on Eve's fed-back SNR.
    pub fn has_eve_feedback(self) -> bool {
        !matches!(self, Scenario::S3)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
            Scenario::S3 => "s3",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(Scenario::S1),
            "s2" | "2" => Ok(Scenario::S2),
            "s3" | "3" => Ok(Scenario::S3),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// One block realization of both links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub gb_hat: f64,
    pub gb_tilde: f64,
    pub gb: f64,
    pub ge_hat: f64,
    pub ge_tilde: f64,
    /// Eve's actual SNR under the scenario's CSI assumption.
    pub ge: f64,
}

/// Draws one block.
///
/// Bob's components are independent exponentials. Eve's channel is built as
/// `h_e = h_hat + h_tilde` from independent complex Gaussians with variances
/// `1 - beta_e` and `beta_e`; in S1 her SNR is `ge_hat / (ge_tilde + 1)`, in
/// S2 and S3 it is `P_e |h_e|^2`.
pub fn sample_block<R: Rng + ?Sized>(stats: &EstimationStats, scenario: Scenario, rng: &mut R) -> ChannelDraw {
    let gb_hat = stats.mean_gb_hat * rng.sample::<f64, _>(Exp1);
    let gb_tilde = stats.mean_gb_tilde * rng.sample::<f64, _>(Exp1);

    let s_hat = (0.5 * (1.0 - stats.beta_e)).sqrt();
    let s_tilde = (0.5 * stats.beta_e).sqrt();
    let hr = s_hat * rng.sample::<f64, _>(StandardNormal);
    let hi = s_hat * rng.sample::<f64, _>(StandardNormal);
    let er = s_tilde * rng.sample::<f64, _>(StandardNormal);
    let ei = s_tilde * rng.sample::<f64, _>(StandardNormal);
    let ge_hat = stats.pe * (hr * hr + hi * hi);
    let ge_tilde = stats.pe * (er * er + ei * ei);
    let ge = match scenario {
        Scenario::S1 => actual_snr(ge_hat, ge_tilde),
        Scenario::S2 | Scenario::S3 => {
            let (re, im) = (hr + er, hi + ei);
            stats.pe * (re * re + im * im)
        }
    };

    ChannelDraw { gb_hat, gb_tilde, gb: actual_snr(gb_hat, gb_tilde), ge_hat, ge_tilde, ge }
}
