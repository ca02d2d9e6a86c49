//! Closed-form transmission, connection-outage and secrecy-outage
//! probabilities, and the resulting throughput.
//!
//! Outage probabilities are conditioned on transmission. An Eve threshold of
//! `f64::INFINITY` means "no threshold" and is handled analytically wherever
//! it appears.

use crate::channel::{snr_stats, EstimationStats, Scenario, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{integrate, ToleranceSpec};
use crate::specfun::marcum_q1;
use serde::{Deserialize, Serialize};

/// Wiretap code rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    /// Codeword rate.
    pub rb: f64,
    /// Confidential information rate. `R_s = R_b` (no redundancy) is allowed
    /// and corresponds to an unconstrained secrecy outage.
    pub rs: f64,
}

impl RatePair {
    pub fn new(rb: f64, rs: f64) -> Result<Self> {
        if !(rs > 0.0 && rb >= rs && rb.is_finite()) {
            return Err(Error::Config(format!("rates must satisfy R_b >= R_s > 0, got R_b={rb}, R_s={rs}")));
        }
        Ok(Self { rb, rs })
    }

    /// Rate redundancy `R_b - R_s` spent on confusing Eve.
    pub fn redundancy(&self) -> f64 {
        self.rb - self.rs
    }

    /// Eve's SNR above which a secrecy outage occurs, `2^(R_b - R_s) - 1`.
    pub fn eve_snr_threshold(&self) -> f64 {
        self.redundancy().exp2() - 1.0
    }

    /// Bob's SNR below which a connection outage occurs, `2^R_b - 1`.
    pub fn bob_snr_threshold(&self) -> f64 {
        self.rb.exp2() - 1.0
    }
}

/// On-off thresholds on the fed-back SNR estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub mu_b: f64,
    /// `f64::INFINITY` disables gating on Eve's estimate.
    pub mu_e: f64,
}

impl Thresholds {
    pub fn new(mu_b: f64, mu_e: f64) -> Result<Self> {
        if !(mu_b >= 0.0 && mu_b.is_finite()) || !(mu_e > 0.0) {
            return Err(Error::Config(format!("thresholds must satisfy mu_b >= 0 and mu_e > 0, got {mu_b}, {mu_e}")));
        }
        Ok(Self { mu_b, mu_e })
    }

    /// Bob-only gating.
    pub fn bob_only(mu_b: f64) -> Result<Self> {
        Self::new(mu_b, f64::INFINITY)
    }
}

/// Closed-form performance of a fixed design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub p_tx: f64,
    pub p_co: f64,
    pub p_so: f64,
    /// Confidential bits per channel use, overhead included.
    pub eta: f64,
}

/// Probability that a block is transmitted.
pub fn p_tx_fixed(stats: &EstimationStats, th: &Thresholds, scenario: Scenario) -> f64 {
    let bob = (-th.mu_b / stats.mean_gb_hat).exp();
    if !scenario.has_eve_feedback() || th.mu_e.is_infinite() {
        bob
    } else {
        bob * -(-th.mu_e / stats.mean_ge_hat).exp_m1()
    }
}

/// Connection outage with a fixed codeword rate and Bob threshold `mu_b`.
///
/// Requires `mu_b >= 2^R_b - 1`; below that bound transmitting can never be
/// decoded reliably and the expression no longer applies.
pub fn p_co_fixed(stats: &EstimationStats, rb: f64, mu_b: f64) -> Result<f64> {
    let d = rb.exp2() - 1.0;
    if mu_b < d * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("mu_b = {mu_b} is below the decodability bound 2^R_b - 1 = {d}")));
    }
    if stats.beta_b == 0.0 {
        return Ok(0.0);
    }
    let k = stats.beta_b * d / (1.0 + stats.beta_b * (d - 1.0));
    let exponent = ((d - mu_b) / (d * stats.mean_gb_tilde)).min(0.0);
    Ok(k * exponent.exp())
}

/// Unconditional probability that Eve's capacity exceeds `R_b - R_s` in S1.
pub fn p_so_s1_unconditional(stats: &EstimationStats, rates: &RatePair) -> f64 {
    let c = rates.eve_snr_threshold();
    let a = (1.0 - stats.beta_e) / (1.0 + stats.beta_e * (c - 1.0));
    a * (-c / stats.mean_ge_hat).exp()
}

/// Secrecy outage in S1, where Eve decodes with her own imperfect estimate.
pub fn p_so_s1(stats: &EstimationStats, rates: &RatePair, mu_e: f64) -> f64 {
    let c = rates.eve_snr_threshold();
    if mu_e <= c {
        return 0.0;
    }
    if mu_e.is_infinite() {
        return p_so_s1_unconditional(stats, rates);
    }
    let be = stats.beta_e;
    let a = (1.0 - be) / (1.0 + be * (c - 1.0));
    let gate = (-mu_e / stats.mean_ge_hat).exp();
    let den = -(-mu_e / stats.mean_ge_hat).exp_m1();
    let first = a * (-c / stats.mean_ge_hat).exp() - gate;
    // Second term: coefficient be*c/(1+be(c-1)) = 1 - a, exponent combined so
    // it stays finite as beta_e -> 0.
    let second = if stats.mean_ge_tilde == 0.0 {
        0.0
    } else {
        (1.0 - a) * (-mu_e / stats.mean_ge_hat - (mu_e / c - 1.0) / stats.mean_ge_tilde).exp()
    };
    ((first + second) / den).clamp(0.0, 1.0)
}

/// Secrecy outage in S3: Eve's SNR is exponential with mean `P_e` and no
/// gating on it is possible.
pub fn p_so_s3(stats: &EstimationStats, rates: &RatePair) -> f64 {
    (-rates.eve_snr_threshold() / stats.mean_ge).exp()
}

/// Conditional probability that Eve (with perfect CSI) exceeds `c` given her
/// fed-back estimate `g_hat`.
pub fn s2_conditional_exceedance(stats: &EstimationStats, c: f64, g_hat: f64) -> Result<f64> {
    if stats.mean_ge_tilde == 0.0 {
        return Ok(if g_hat > c { 1.0 } else { 0.0 });
    }
    marcum_q1((2.0 * g_hat / stats.mean_ge_tilde).sqrt(), (2.0 * c / stats.mean_ge_tilde).sqrt())
}

/// Limit of the S2 secrecy outage as `mu_e -> 0`; the constraint is only
/// feasible for `epsilon` strictly above it.
pub fn p_so_s2_floor(stats: &EstimationStats, rates: &RatePair) -> Result<f64> {
    s2_conditional_exceedance(stats, rates.eve_snr_threshold(), 0.0)
}

/// Secrecy outage in S2, averaging the Marcum-Q conditional law over
/// `ge_hat in [0, mu_e]`.
pub fn p_so_s2(stats: &EstimationStats, rates: &RatePair, mu_e: f64) -> Result<f64> {
    if mu_e.is_infinite() {
        return Ok(p_so_s3(stats, rates));
    }
    if stats.mean_ge_tilde == 0.0 {
        // Perfect estimate: Eve's SNR equals the fed-back value.
        return Ok(p_so_s1(stats, rates, mu_e));
    }
    if !(mu_e >= 0.0) {
        return Err(Error::Precondition(format!("mu_e must be non-negative, got {mu_e}")));
    }
    let c = rates.eve_snr_threshold();
    if mu_e == 0.0 {
        return p_so_s2_floor(stats, rates);
    }
    let scale = stats.mean_ge_hat.min(stats.mean_ge_tilde);
    if mu_e < 1e-6 * scale {
        // Integrand is nearly constant; its mean over [0, mu_e] is the
        // midpoint value up to O((mu_e/scale)^2).
        return s2_conditional_exceedance(stats, c, 0.5 * mu_e);
    }

    let tol = ToleranceSpec { abs_tol: 1e-15, rel_tol: 1e-12, max_iter: 4000 };
    let mut failure = None;
    let numerator = integrate(
        |g| {
            let q = s2_conditional_exceedance(stats, c, g).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            });
            (-g / stats.mean_ge_hat).exp() * q
        },
        0.0,
        mu_e,
        tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let den = stats.mean_ge_hat * -(-mu_e / stats.mean_ge_hat).exp_m1();
    Ok((numerator / den).clamp(0.0, 1.0))
}

/// Secrecy outage for any scenario.
pub fn p_so(stats: &EstimationStats, rates: &RatePair, mu_e: f64, scenario: Scenario) -> Result<f64> {
    match scenario {
        Scenario::S1 => Ok(p_so_s1(stats, rates, mu_e)),
        Scenario::S2 => p_so_s2(stats, rates, mu_e),
        Scenario::S3 => Ok(p_so_s3(stats, rates)),
    }
}

/// Connection outage for an adaptively chosen codeword rate at a given
/// estimate `gb_hat`. Requires `R_b <= log2(1 + gb_hat)`.
pub fn p_co_adaptive(stats: &EstimationStats, rb: f64, gb_hat: f64) -> Result<f64> {
    let d = rb.exp2() - 1.0;
    if gb_hat < d * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("R_b = {rb} exceeds log2(1 + gb_hat) for gb_hat = {gb_hat}")));
    }
    if stats.mean_gb_tilde == 0.0 {
        return Ok(0.0);
    }
    let excess = (gb_hat / d - 1.0).max(0.0);
    Ok((-excess / stats.mean_gb_tilde).exp())
}

/// Assembles the closed-form report for fixed rates and thresholds.
pub fn throughput_fixed(
    cfg: &SystemConfig,
    scenario: Scenario,
    th: &Thresholds,
    rates: &RatePair,
) -> Result<PerformanceReport> {
    let stats = snr_stats(cfg)?;
    report_from_stats(cfg, &stats, scenario, th, rates)
}

pub(crate) fn report_from_stats(
    cfg: &SystemConfig,
    stats: &EstimationStats,
    scenario: Scenario,
    th: &Thresholds,
    rates: &RatePair,
) -> Result<PerformanceReport> {
    let p_tx = p_tx_fixed(stats, th, scenario);
    let p_co = p_co_fixed(stats, rates.rb, th.mu_b)?;
    let p_so = p_so(stats, rates, th.mu_e, scenario)?;
    let eta = cfg.overhead_factor() * p_tx * (1.0 - p_co) * rates.rs;
    Ok(PerformanceReport { p_tx, p_co, p_so, eta })
}

/// Slope of the throughput in `mu_e` at `mu_e = 0` (leading Taylor term),
/// for the S2 gating structure and no overhead.
pub fn eta_slope_at_zero_mu_e(stats: &EstimationStats, rates: &RatePair, mu_b: f64) -> Result<f64> {
    let p_co = p_co_fixed(stats, rates.rb, mu_b)?;
    Ok((1.0 - p_co) * rates.rs * (-mu_b / stats.mean_gb_hat).exp() / (stats.pe * (1.0 - stats.beta_e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stats(alpha: f64) -> EstimationStats {
        snr_stats(&SystemConfig::new(10.0, 1.0, alpha).unwrap()).unwrap()
    }

    fn rates() -> RatePair {
        RatePair::new(2.0, 1.0).unwrap()
    }

    #[test]
    fn rate_and_threshold_validation() {
        assert!(RatePair::new(1.0, 1.5).is_err());
        assert!(RatePair::new(1.0, 1.0).is_ok());
        assert!(RatePair::new(1.0, 0.0).is_err());
        assert!(Thresholds::new(-1.0, 1.0).is_err());
        assert!(Thresholds::new(1.0, 0.0).is_err());
        assert!(Thresholds::bob_only(0.0).unwrap().mu_e.is_infinite());
    }

    #[test]
    fn p_tx_examples() {
        let s = stats(5.0);
        assert_eq!(p_tx_fixed(&s, &Thresholds::bob_only(0.0).unwrap(), Scenario::S1), 1.0);
        let th = Thresholds::new(3.0, 0.5).unwrap();
        assert_relative_eq!(p_tx_fixed(&s, &th, Scenario::S3), (-153.0f64 / 500.0).exp(), max_relative = 1e-14);
        let gated = p_tx_fixed(&s, &th, Scenario::S1);
        assert_relative_eq!(gated, (-0.306f64).exp() * (1.0 - (-0.6f64).exp()), max_relative = 1e-14);
    }

    #[test]
    fn p_co_examples() {
        let s = stats(5.0);
        assert_relative_eq!(p_co_fixed(&s, 2.0, 3.0).unwrap(), 3.0 / 53.0, max_relative = 1e-14);
        let perfect = stats(f64::INFINITY);
        assert_eq!(p_co_fixed(&perfect, 2.0, 3.0).unwrap(), 0.0);
        assert!(matches!(p_co_fixed(&s, 2.0, 2.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn p_so_s1_examples() {
        let s = stats(5.0);
        assert_eq!(p_so_s1(&s, &rates(), 1.0), 0.0);
        let perfect = stats(f64::INFINITY);
        assert_relative_eq!(p_so_s1(&perfect, &rates(), f64::INFINITY), (-1.0f64).exp(), max_relative = 1e-15);
        // The finite-threshold form approaches the unconditional value.
        let far = p_so_s1(&s, &rates(), 60.0);
        assert_relative_eq!(far, p_so_s1_unconditional(&s, &rates()), max_relative = 1e-12);
    }

    #[test]
    fn p_so_s2_examples() {
        let s = stats(5.0);
        let floor = (-1.0 / s.mean_ge_tilde).exp();
        assert_relative_eq!(p_so_s2(&s, &rates(), 0.0).unwrap(), floor, max_relative = 1e-12);
        // The conditional law rises linearly off the floor, about 2e-8 relative per 1e-9 of mu_e here.
        assert_relative_eq!(p_so_s2(&s, &rates(), 1e-9).unwrap(), floor, max_relative = 1e-7);
        // Continuity across the switch from the midpoint fallback to quadrature.
        let edge = 1e-6 * s.mean_ge_hat.min(s.mean_ge_tilde);
        let below = p_so_s2(&s, &rates(), edge * (1.0 - 1e-9)).unwrap();
        let above = p_so_s2(&s, &rates(), edge * (1.0 + 1e-9)).unwrap();
        assert_relative_eq!(below, above, max_relative = 1e-11);
        assert_relative_eq!(p_so_s2(&s, &rates(), f64::INFINITY).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        // Large finite threshold converges to the unconditional S3 value.
        assert_relative_eq!(p_so_s2(&s, &rates(), 60.0).unwrap(), p_so_s3(&s, &rates()), max_relative = 1e-9);
    }

    #[test]
    fn p_so_s3_examples() {
        let s = stats(5.0);
        assert_relative_eq!(p_so_s3(&s, &rates()), 0.367_879_441_171_442_3, max_relative = 1e-15);
        assert_eq!(p_so_s3(&s, &RatePair::new(40.0, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn p_co_adaptive_examples() {
        let s = stats(5.0);
        assert_eq!(p_co_adaptive(&s, 2.0, 3.0).unwrap(), 1.0);
        assert!(p_co_adaptive(&s, 2.0, 1e4).unwrap() < 1e-300);
        assert!(p_co_adaptive(&s, 2.0, 2.0).is_err());
        assert_relative_eq!(
            p_co_adaptive(&s, 2.0, 9.0).unwrap(),
            (-(51.0 / 10.0) * 2.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn throughput_examples() {
        let cfg = SystemConfig::new(10.0, 1.0, 5.0).unwrap();
        let th = Thresholds::bob_only(3.0).unwrap();
        let r = throughput_fixed(&cfg, Scenario::S3, &th, &rates()).unwrap();
        assert_relative_eq!(r.eta, r.p_tx * (1.0 - r.p_co) * 1.0, max_relative = 1e-15);
        let halved = throughput_fixed(&cfg.with_theta(1.0).unwrap(), Scenario::S3, &th, &rates()).unwrap();
        assert_relative_eq!(halved.eta, 0.5 * r.eta, max_relative = 1e-15);
        assert!(r.eta <= 1.0);
    }

    #[test]
    fn slope_examples() {
        let s = stats(5.0);
        let one = eta_slope_at_zero_mu_e(&s, &rates(), 3.0).unwrap();
        let two = eta_slope_at_zero_mu_e(&s, &RatePair::new(3.0, 2.0).unwrap(), 7.0).unwrap();
        let two_same_rb = eta_slope_at_zero_mu_e(&s, &RatePair::new(2.0, 0.5).unwrap(), 3.0).unwrap();
        assert_relative_eq!(two_same_rb, 0.5 * one, max_relative = 1e-15);
        assert!(two > 0.0);
        assert!(eta_slope_at_zero_mu_e(&s, &rates(), 1e5).unwrap() < 1e-300);
    }

    #[test]
    fn monotonicity_on_grids() {
        for alpha in [0.5, 1.0, 5.0, 50.0] {
            let s = stats(alpha);
            let (mut so1, mut so2, mut co, mut tx_b, mut tx_e) = (0.0, 0.0, 1.0, 1.0, 0.0);
            for i in 0..120 {
                let mu = 0.05 + i as f64 * 0.1;
                let v1 = p_so_s1(&s, &rates(), mu);
                let v2 = p_so_s2(&s, &rates(), mu).unwrap();
                assert!(v1 >= so1 - 1e-13 && v2 >= so2 - 1e-12, "alpha={alpha} mu={mu}");
                so1 = v1;
                so2 = v2;
                let mub = 3.0 + i as f64 * 0.2;
                let c = p_co_fixed(&s, 2.0, mub).unwrap();
                assert!(c <= co + 1e-15);
                co = c;
                let tb = p_tx_fixed(&s, &Thresholds::new(mub, 1.0).unwrap(), Scenario::S1);
                assert!(tb <= tx_b);
                tx_b = tb;
                let te = p_tx_fixed(&s, &Thresholds::new(3.0, mu).unwrap(), Scenario::S2);
                assert!(te >= tx_e);
                tx_e = te;
            }
        }
    }

    #[test]
    fn limit_chain() {
        let s = stats(2.0);
        assert_eq!(p_so_s2(&s, &rates(), f64::INFINITY).unwrap(), p_so_s3(&s, &rates()));
        let perfect = stats(f64::INFINITY);
        assert_relative_eq!(
            p_so_s1(&perfect, &rates(), f64::INFINITY),
            p_so_s3(&perfect, &rates()),
            max_relative = 1e-15
        );
    }
}
