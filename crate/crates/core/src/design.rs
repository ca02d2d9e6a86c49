//! Throughput-maximizing designs under outage constraints: feasibility,
//! optimal on-off thresholds for fixed rates, joint rate design with
//! non-adaptive and adaptive codeword rates, and pilot-power optimization.

use crate::channel::{snr_stats, EstimationStats, Scenario, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    expand_upper_bracket, find_root_monotone, integrate, maximize_scalar, maximize_scalar_seeded, ToleranceSpec,
};
use crate::outage::{
    p_co_fixed, p_so_s1, p_so_s1_unconditional, p_so_s2, p_so_s2_floor, p_so_s3, report_from_stats,
    PerformanceReport, RatePair, Thresholds,
};
use crate::specfun::lambert_w0;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Relative slack applied to boundary comparisons that are equalities by
/// construction (for example a joint design that meets `p_so = eps`).
const BOUNDARY_SLACK: f64 = 1e-12;

/// Upper limits on the secrecy and connection outage probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageConstraints {
    pub eps: f64,
    pub delta: f64,
}

impl OutageConstraints {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("eps must lie in [0, 1], got {eps}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(Self { eps, delta })
    }
}

/// Which transmitter-side design is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Given rates, thresholds optimized for one knowledge scenario.
    Fixed(Scenario),
    /// Rates and Bob threshold optimized jointly, rates constant over blocks.
    NonAdaptive,
    /// Codeword rate adapted to Bob's fed-back estimate each block.
    Adaptive,
}

impl Scheme {
    pub fn needs_rates(self) -> bool {
        matches!(self, Scheme::Fixed(_))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Fixed(sc) => write!(f, "{sc}"),
            Scheme::NonAdaptive => f.write_str("nonadaptive"),
            Scheme::Adaptive => f.write_str("adaptive"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nonadaptive" | "non-adaptive" => Ok(Scheme::NonAdaptive),
            "adaptive" => Ok(Scheme::Adaptive),
            other => other.parse().map(Scheme::Fixed),
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Smallest admissible `eps` (strict or not depending on the scheme),
    /// when the scheme has one.
    pub eps_bound: Option<f64>,
    pub reason: Option<String>,
}

impl FeasibilityReport {
    fn ok(eps_bound: Option<f64>) -> Self {
        Self { feasible: true, eps_bound, reason: None }
    }

    fn fail(eps_bound: Option<f64>, reason: String) -> Self {
        Self { feasible: false, eps_bound, reason: Some(reason) }
    }
}

/// Which outage constraints hold with equality at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Binding {
    pub reliability: bool,
    pub security: bool,
}

/// Result of a fixed-rate or non-adaptive design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSolution {
    pub scheme: Scheme,
    pub constraints: OutageConstraints,
    pub feasibility: FeasibilityReport,
    pub thresholds: Option<Thresholds>,
    pub rates: Option<RatePair>,
    pub report: Option<PerformanceReport>,
    pub binding: Binding,
}

impl DesignSolution {
    /// Throughput of the design; zero when infeasible.
    pub fn eta(&self) -> f64 {
        self.report.map_or(0.0, |r| r.eta)
    }

    fn infeasible(scheme: Scheme, con: OutageConstraints, rates: Option<RatePair>, f: FeasibilityReport) -> Self {
        Self { scheme, constraints: con, feasibility: f, thresholds: None, rates, report: None, binding: Binding::default() }
    }
}

/// Feasibility of a scheme. `rates` is required for fixed-rate scenarios and
/// ignored otherwise.
pub fn feasibility(
    scheme: Scheme,
    stats: &EstimationStats,
    rates: Option<&RatePair>,
    con: &OutageConstraints,
) -> Result<FeasibilityReport> {
    match scheme {
        Scheme::Fixed(sc) => {
            let rates = rates.ok_or_else(|| Error::Precondition(format!("scenario {sc} needs fixed rates")))?;
            fixed_feasibility(stats, sc, rates, con)
        }
        Scheme::NonAdaptive | Scheme::Adaptive => Ok(if con.eps > 0.0 {
            FeasibilityReport::ok(Some(0.0))
        } else {
            FeasibilityReport::fail(
                Some(0.0),
                "joint rate design needs eps > 0: perfect secrecy forces R_s = 0".to_string(),
            )
        }),
    }
}

fn fixed_feasibility(
    stats: &EstimationStats,
    sc: Scenario,
    rates: &RatePair,
    con: &OutageConstraints,
) -> Result<FeasibilityReport> {
    let c = rates.eve_snr_threshold();
    Ok(match sc {
        Scenario::S1 => FeasibilityReport::ok(None),
        Scenario::S2 => {
            let floor = p_so_s2_floor(stats, rates)?;
            if con.eps > floor || stats.mean_ge_tilde == 0.0 {
                FeasibilityReport::ok(Some(floor))
            } else {
                FeasibilityReport::fail(
                    Some(floor),
                    format!(
                        "eps = {} must exceed the secrecy outage floor exp(-(2^(R_b-R_s)-1)/(P_e beta_e)) = {floor:.6e}",
                        con.eps
                    ),
                )
            }
        }
        Scenario::S3 => {
            let bound = (-c / stats.mean_ge).exp();
            if con.eps >= bound * (1.0 - BOUNDARY_SLACK) {
                FeasibilityReport::ok(Some(bound))
            } else {
                FeasibilityReport::fail(
                    Some(bound),
                    format!(
                        "eps = {} is below the secrecy outage exp(-(2^(R_b-R_s)-1)/P_e) = {bound:.6e}",
                        con.eps
                    ),
                )
            }
        }
    })
}

/// Optimal Bob threshold for codeword rate `rb` under `p_co <= delta`.
///
/// Returns the threshold and whether the reliability constraint binds. The
/// threshold never falls below `2^rb - 1`, where throughput is stationary.
pub fn optimal_mu_b(stats: &EstimationStats, rb: f64, delta: f64) -> (f64, bool) {
    let d = rb.exp2() - 1.0;
    let bb = stats.beta_b;
    if bb == 0.0 || delta >= 1.0 {
        return (d, false);
    }
    let branch = ((1.0 - bb) * delta / (bb * (1.0 - delta))).ln_1p() / std::f64::consts::LN_2;
    if rb <= branch {
        return (d, false);
    }
    let log_ratio = (delta * (1.0 + bb * (d - 1.0)) / (bb * d)).ln();
    (d * (1.0 - stats.mean_gb_tilde * log_ratio), true)
}

/// Positive root `x` of `p_co(x; mu_b) = delta`, i.e. the largest Bob SNR
/// threshold `2^R_b - 1` meeting the reliability constraint for a pinned
/// `mu_b` (ignoring `x <= mu_b`). Infinite when estimation is perfect.
pub fn reliability_rate_limit(stats: &EstimationStats, mu_b: f64, delta: f64) -> Result<f64> {
    if !(mu_b > 0.0 && mu_b.is_finite()) {
        return Err(Error::Precondition(format!("mu_b must be positive and finite, got {mu_b}")));
    }
    let bb = stats.beta_b;
    if bb == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mt = stats.mean_gb_tilde;
    let ln_delta = delta.ln();
    // Increasing in x, from -inf at 0+ to 1/mt - ln(delta) > 0.
    let h = |x: f64| (bb * x / (1.0 + bb * (x - 1.0))).ln() + (1.0 - mu_b / x) / mt - ln_delta;
    let lo = mu_b * 1e-12;
    let (a, b) = expand_upper_bracket(h, lo, mu_b, mu_b * 1e12)?;
    find_root_monotone(h, a, b, ToleranceSpec::tight())
}

/// Feasibility of the non-adaptive scheme when `mu_b` is fixed in advance:
/// secure transmission with `R_s > 0` needs `exp(-min(mu_b, F)/P_e) < eps`
/// where `F` is [`reliability_rate_limit`].
pub fn nonadaptive_feasibility_pinned(
    stats: &EstimationStats,
    mu_b: f64,
    con: &OutageConstraints,
) -> Result<FeasibilityReport> {
    let limit = reliability_rate_limit(stats, mu_b, con.delta)?;
    let bound = (-mu_b.min(limit) / stats.mean_ge).exp();
    Ok(if bound < con.eps {
        FeasibilityReport::ok(Some(bound))
    } else {
        FeasibilityReport::fail(
            Some(bound),
            format!("eps = {} must exceed exp(-min(mu_b, F)/P_e) = {bound:.6e} for mu_b = {mu_b}", con.eps),
        )
    })
}

fn mu_e_s1(stats: &EstimationStats, rates: &RatePair, eps: f64) -> Result<f64> {
    if p_so_s1_unconditional(stats, rates) <= eps {
        return Ok(f64::INFINITY);
    }
    let c = rates.eve_snr_threshold();
    if eps == 0.0 {
        // p_so vanishes exactly for mu_e <= c and is positive beyond.
        return Ok(c);
    }
    let g = |mu: f64| p_so_s1(stats, rates, mu) - eps;
    let scale = stats.mean_ge_hat.max(c);
    match expand_upper_bracket(g, c, c + stats.mean_ge_hat, c + 1e3 * scale) {
        Ok((a, b)) => find_root_monotone(g, a, b, ToleranceSpec::tight()),
        // Only reachable when eps is within rounding of the unconditional limit.
        Err(Error::Bracket { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn mu_e_s2(stats: &EstimationStats, rates: &RatePair, eps: f64) -> Result<f64> {
    if p_so_s3(stats, rates) <= eps {
        return Ok(f64::INFINITY);
    }
    if stats.mean_ge_tilde == 0.0 {
        return mu_e_s1(stats, rates, eps);
    }
    let mut failure = None;
    let mut g = |mu: f64| match p_so_s2(stats, rates, mu) {
        Ok(p) => p - eps,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let scale = stats.mean_ge_hat.max(rates.eve_snr_threshold());
    let bracket = expand_upper_bracket(&mut g, 0.0, stats.mean_ge_hat.min(stats.mean_ge_tilde), 1e3 * scale);
    let root = match bracket {
        Ok((a, b)) => find_root_monotone(&mut g, a, b, ToleranceSpec::tight()),
        Err(Error::Bracket { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    };
    match failure {
        Some(e) => Err(e),
        None => root,
    }
}

/// Optimal thresholds for given rates in one scenario.
pub fn solve_fixed(
    cfg: &SystemConfig,
    scenario: Scenario,
    rates: &RatePair,
    con: &OutageConstraints,
) -> Result<DesignSolution> {
    let stats = snr_stats(cfg)?;
    solve_fixed_with_stats(cfg, &stats, scenario, rates, con)
}

fn solve_fixed_with_stats(
    cfg: &SystemConfig,
    stats: &EstimationStats,
    scenario: Scenario,
    rates: &RatePair,
    con: &OutageConstraints,
) -> Result<DesignSolution> {
    let scheme = Scheme::Fixed(scenario);
    let feas = fixed_feasibility(stats, scenario, rates, con)?;
    if !feas.feasible {
        return Ok(DesignSolution::infeasible(scheme, *con, Some(*rates), feas));
    }
    let (mu_b, reliability) = optimal_mu_b(stats, rates.rb, con.delta);
    let mu_e = match scenario {
        Scenario::S1 => mu_e_s1(stats, rates, con.eps)?,
        Scenario::S2 => mu_e_s2(stats, rates, con.eps)?,
        Scenario::S3 => f64::INFINITY,
    };
    let thresholds = Thresholds { mu_b, mu_e };
    let report = report_from_stats(cfg, stats, scenario, &thresholds, rates)?;
    let security = match scenario {
        Scenario::S3 => (report.p_so - con.eps).abs() <= BOUNDARY_SLACK * con.eps.max(f64::MIN_POSITIVE),
        _ => mu_e.is_finite(),
    };
    Ok(DesignSolution {
        scheme,
        constraints: *con,
        feasibility: feas,
        thresholds: Some(thresholds),
        rates: Some(*rates),
        report: Some(report),
        binding: Binding { reliability, security },
    })
}

/// Scenario 1: Eve feeds back an imperfect estimate and decodes with it.
pub fn solve_s1(cfg: &SystemConfig, rates: &RatePair, con: &OutageConstraints) -> Result<DesignSolution> {
    solve_fixed(cfg, Scenario::S1, rates, con)
}

/// Scenario 2: Eve feeds back an imperfect estimate but decodes with perfect CSI.
pub fn solve_s2(cfg: &SystemConfig, rates: &RatePair, con: &OutageConstraints) -> Result<DesignSolution> {
    solve_fixed(cfg, Scenario::S2, rates, con)
}

/// Scenario 3: only Eve's channel statistics are known.
pub fn solve_s3(cfg: &SystemConfig, rates: &RatePair, con: &OutageConstraints) -> Result<DesignSolution> {
    solve_fixed(cfg, Scenario::S3, rates, con)
}

/// Rate redundancy `k = log2(1 + P_e ln(1/eps))` that pins `p_so = eps`
/// when Eve's instantaneous SNR is unknown.
pub fn secrecy_rate_offset(pe: f64, eps: f64) -> f64 {
    (pe * (1.0 / eps).ln()).ln_1p() / std::f64::consts::LN_2
}

/// Search interval for the non-adaptive codeword rate. Beyond its upper end
/// the throughput is decreasing in `R_b`.
pub fn nonadaptive_search_interval(stats: &EstimationStats, k: f64, delta: f64) -> Result<(f64, f64)> {
    let w = lambert_w0((-k).exp2() * stats.mean_gb_hat)?;
    let capacity_end = k + w / std::f64::consts::LN_2;
    let branch_end = if stats.beta_b == 0.0 || delta >= 1.0 {
        f64::INFINITY
    } else {
        ((1.0 - stats.beta_b) * delta / (stats.beta_b * (1.0 - delta))).ln_1p() / std::f64::consts::LN_2
    };
    let hi = if branch_end.is_finite() { branch_end.max(capacity_end) } else { capacity_end };
    Ok((k, hi))
}

/// Throughput of the non-adaptive scheme at codeword rate `rb` (overhead
/// excluded), with `mu_b` optimized for `rb`.
pub fn nonadaptive_objective(stats: &EstimationStats, k: f64, delta: f64, rb: f64) -> f64 {
    if rb <= k {
        return 0.0;
    }
    let (mu_b, _) = optimal_mu_b(stats, rb, delta);
    let p_co = p_co_fixed(stats, rb, mu_b).unwrap_or(1.0);
    (rb - k) * (-mu_b / stats.mean_gb_hat).exp() * (1.0 - p_co)
}

/// Joint design of rates and Bob threshold with rates fixed across blocks.
/// Eve is known only statistically.
pub fn solve_nonadaptive(cfg: &SystemConfig, con: &OutageConstraints) -> Result<DesignSolution> {
    let stats = snr_stats(cfg)?;
    let scheme = Scheme::NonAdaptive;
    let feas = feasibility(scheme, &stats, None, con)?;
    if !feas.feasible {
        return Ok(DesignSolution::infeasible(scheme, *con, None, feas));
    }
    let k = secrecy_rate_offset(stats.mean_ge, con.eps);
    let (lo, hi) = nonadaptive_search_interval(&stats, k, con.delta)?;
    if !(hi > lo) {
        let reason = format!("empty codeword-rate search interval ({lo}, {hi})");
        return Ok(DesignSolution::infeasible(scheme, *con, None, FeasibilityReport::fail(Some(0.0), reason)));
    }
    let (rb, _) = maximize_scalar(|rb| nonadaptive_objective(&stats, k, con.delta, rb), lo, hi, ToleranceSpec::tight())?;
    if !(rb > k) {
        let reason = "no codeword rate above the secrecy offset yields positive throughput".to_string();
        return Ok(DesignSolution::infeasible(scheme, *con, None, FeasibilityReport::fail(Some(0.0), reason)));
    }
    let rates = RatePair::new(rb, rb - k)?;
    let (mu_b, reliability) = optimal_mu_b(&stats, rb, con.delta);
    let thresholds = Thresholds { mu_b, mu_e: f64::INFINITY };
    let report = report_from_stats(cfg, &stats, Scenario::S3, &thresholds, &rates)?;
    Ok(DesignSolution {
        scheme,
        constraints: *con,
        feasibility: feas,
        thresholds: Some(thresholds),
        rates: Some(rates),
        report: Some(report),
        binding: Binding { reliability, security: true },
    })
}

/// Node layout for the adaptive rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGrid {
    pub nodes: usize,
    /// Smallest node offset above `mu_b`, in units of Bob's mean estimate.
    pub first_offset: f64,
    /// Largest node offset above `mu_b`, in units of Bob's mean estimate.
    pub last_offset: f64,
}

impl Default for AdaptiveGrid {
    fn default() -> Self {
        Self { nodes: 512, first_offset: 1e-6, last_offset: 1e8f64.ln() }
    }
}

/// One entry of the adaptive rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateNode {
    pub gb_hat: f64,
    pub rb: f64,
    pub rs: f64,
}

/// Adaptive-rate policy: transmit when `gb_hat > mu_b` with `R_b` read from
/// the rate table (piecewise-linear between nodes) and `R_s = R_b - k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptivePolicy {
    pub constraints: OutageConstraints,
    pub mu_b: f64,
    pub k: f64,
    /// Rate table; the first entry is the anchor `(mu_b, k, 0)`.
    pub rate_table: Vec<RateNode>,
    pub report: PerformanceReport,
    pub eta: f64,
    mean_gb_tilde: f64,
    backoff: f64,
}

impl AdaptivePolicy {
    /// Rates used when Bob's estimate is `gb_hat`, or `None` when the
    /// transmitter stays silent.
    pub fn rate_for(&self, gb_hat: f64) -> Option<(f64, f64)> {
        if !(gb_hat > self.mu_b) {
            return None;
        }
        let table = &self.rate_table;
        let last = table.last().expect("rate table is never empty");
        let rb = if gb_hat >= last.gb_hat {
            if gb_hat == last.gb_hat {
                last.rb
            } else {
                adaptive_node_rate(self.mean_gb_tilde, self.backoff, self.k, gb_hat).unwrap_or(last.rb)
            }
        } else {
            let j = table.partition_point(|n| n.gb_hat <= gb_hat);
            let (a, b) = (&table[j - 1], &table[j]);
            let t = (gb_hat - a.gb_hat) / (b.gb_hat - a.gb_hat);
            a.rb + t * (b.rb - a.rb)
        };
        Some((rb, rb - self.k))
    }
}

/// Connection outage of an adaptive rate, evaluated without the decodability
/// precondition (callers guarantee it).
fn adaptive_p_co(mean_gb_tilde: f64, rb: f64, gb_hat: f64) -> f64 {
    if mean_gb_tilde == 0.0 {
        return 0.0;
    }
    let d = rb.exp2() - 1.0;
    (-(gb_hat / d - 1.0).max(0.0) / mean_gb_tilde).exp()
}

/// Best codeword rate for one value of Bob's estimate.
fn adaptive_node_rate(mean_gb_tilde: f64, backoff: f64, k: f64, gb_hat: f64) -> Result<f64> {
    let hi = (gb_hat / backoff).ln_1p() / std::f64::consts::LN_2;
    if !(hi > k) {
        return Err(Error::Precondition(format!(
            "adaptive node gb_hat = {gb_hat} leaves no rate above k = {k} (upper end {hi})"
        )));
    }
    if mean_gb_tilde == 0.0 {
        return Ok(hi);
    }
    let objective = |rb: f64| (rb - k) * (1.0 - adaptive_p_co(mean_gb_tilde, rb, gb_hat));
    let (rb, _) = maximize_scalar(objective, k, hi, ToleranceSpec::tight())
        .map_err(|e| Error::Precondition(format!("adaptive rate optimization failed at gb_hat = {gb_hat}: {e}")))?;
    Ok(rb)
}

/// Joint design with codeword rates adapted to Bob's estimate.
pub fn solve_adaptive(cfg: &SystemConfig, con: &OutageConstraints, grid: AdaptiveGrid) -> Result<AdaptivePolicy> {
    if !(con.eps > 0.0) {
        return Err(Error::Precondition("adaptive design needs eps > 0".into()));
    }
    if grid.nodes < 2 || !(grid.first_offset > 0.0 && grid.last_offset > grid.first_offset) {
        return Err(Error::Config(format!("invalid adaptive grid {grid:?}")));
    }
    let stats = snr_stats(cfg)?;
    let k = secrecy_rate_offset(stats.mean_ge, con.eps);
    let backoff = 1.0 + stats.mean_gb_tilde * (1.0 / con.delta).ln();
    let mu_b = backoff * stats.mean_ge * (1.0 / con.eps).ln();
    let mg = stats.mean_gb_hat;

    let ratio = (grid.last_offset / grid.first_offset).ln() / (grid.nodes - 1) as f64;
    let offsets: Vec<f64> = (0..grid.nodes).map(|i| mg * grid.first_offset * (ratio * i as f64).exp()).collect();
    let solved: Vec<RateNode> = offsets
        .par_iter()
        .map(|&t| {
            let g = mu_b + t;
            let rb = adaptive_node_rate(stats.mean_gb_tilde, backoff, k, g)?;
            Ok(RateNode { gb_hat: g, rb, rs: rb - k })
        })
        .collect::<Result<_>>()?;
    let mut rate_table = Vec::with_capacity(grid.nodes + 1);
    rate_table.push(RateNode { gb_hat: mu_b, rb: k, rs: 0.0 });
    rate_table.extend(solved);

    // Integrate the interpolated policy segment by segment so the closed form
    // describes exactly what the policy does.
    let tol = ToleranceSpec { abs_tol: 1e-15, rel_tol: 1e-11, max_iter: 200 };
    let mt = stats.mean_gb_tilde;
    let mut rate_mass = 0.0;
    let mut outage_mass = 0.0;
    for w in rate_table.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (b.rb - a.rb) / (b.gb_hat - a.gb_hat);
        let rb_at = |g: f64| a.rb + slope * (g - a.gb_hat);
        let density = |g: f64| (-g / mg).exp() / mg;
        rate_mass += integrate(
            |g| {
                let rb = rb_at(g);
                (rb - k) * (1.0 - adaptive_p_co(mt, rb, g)) * density(g)
            },
            a.gb_hat,
            b.gb_hat,
            tol,
        )?;
        outage_mass += integrate(|g| adaptive_p_co(mt, rb_at(g), g) * density(g), a.gb_hat, b.gb_hat, tol)?;
    }
    let p_tx = (-mu_b / mg).exp();
    let eta = cfg.overhead_factor() * rate_mass;
    let p_co = if p_tx > 0.0 { (outage_mass / p_tx).clamp(0.0, 1.0) } else { 0.0 };
    let p_so = (-(k.exp2() - 1.0) / stats.mean_ge).exp();
    let report = PerformanceReport { p_tx, p_co, p_so, eta };
    Ok(AdaptivePolicy { constraints: *con, mu_b, k, rate_table, report, eta, mean_gb_tilde: mt, backoff })
}

/// Throughput achieved by a scheme's optimal design; zero when infeasible.
pub fn optimal_throughput(
    scheme: Scheme,
    cfg: &SystemConfig,
    rates: Option<&RatePair>,
    con: &OutageConstraints,
) -> Result<f64> {
    match scheme {
        Scheme::Fixed(sc) => {
            let rates = rates.ok_or_else(|| Error::Precondition(format!("scenario {sc} needs fixed rates")))?;
            Ok(solve_fixed(cfg, sc, rates, con)?.eta())
        }
        Scheme::NonAdaptive => Ok(solve_nonadaptive(cfg, con)?.eta()),
        Scheme::Adaptive => {
            if con.eps > 0.0 {
                Ok(solve_adaptive(cfg, con, AdaptiveGrid::default())?.eta)
            } else {
                Ok(0.0)
            }
        }
    }
}

/// Smallest secrecy-outage bound at which a joint-design scheme reaches
/// `target` throughput, searched over `eps` in `[eps_min, 1]`.
///
/// Returns `None` when even `eps = 1` falls short and `eps_min` when the
/// target is already met there. Relies on the optimal throughput being
/// nondecreasing in `eps`.
pub fn min_eps_for_throughput(
    scheme: Scheme,
    cfg: &SystemConfig,
    delta: f64,
    target: f64,
    eps_min: f64,
) -> Result<Option<f64>> {
    if scheme.needs_rates() {
        return Err(Error::Precondition(format!("{scheme} is not a joint-design scheme")));
    }
    if !(eps_min > 0.0 && eps_min < 1.0) {
        return Err(Error::Precondition(format!("eps_min must lie in (0, 1), got {eps_min}")));
    }
    let eta = |eps: f64| -> Result<f64> { optimal_throughput(scheme, cfg, None, &OutageConstraints::new(eps, delta)?) };
    if eta(1.0)? < target {
        return Ok(None);
    }
    if eta(eps_min)? >= target {
        return Ok(Some(eps_min));
    }
    let mut failure = None;
    let root = find_root_monotone(
        |log_eps| {
            eta(log_eps.exp().min(1.0)).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            }) - target
        },
        eps_min.ln(),
        0.0,
        ToleranceSpec { abs_tol: 1e-12, rel_tol: 1e-10, max_iter: 200 },
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(Some(root?.exp().min(1.0))),
    }
}

/// Best pilot power and the throughput it achieves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PilotOptimum {
    pub feasible: bool,
    pub alpha: f64,
    pub eta: f64,
    /// Coarse scan `(alpha, eta)` in increasing `alpha`.
    pub scan: Vec<(f64, f64)>,
}

/// Number of log-spaced coarse-scan points for [`optimize_pilot_power`].
pub const PILOT_SCAN_POINTS: usize = 64;

/// Maximizes the optimal throughput over the pilot power `alpha`, re-solving
/// the inner design at every candidate. `cfg.alpha` is ignored.
pub fn optimize_pilot_power(
    scheme: Scheme,
    cfg: &SystemConfig,
    rates: Option<&RatePair>,
    con: &OutageConstraints,
    alpha_range: (f64, f64),
) -> Result<PilotOptimum> {
    let (lo, hi) = alpha_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Precondition(format!("alpha range must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let eta_at = |log_alpha: f64| -> Result<f64> {
        let alpha = log_alpha.exp().clamp(lo, hi);
        optimal_throughput(scheme, &cfg.with_alpha(alpha)?, rates, con)
    };
    let (llo, lhi) = (lo.ln(), hi.ln());
    let n = PILOT_SCAN_POINTS;
    let xs: Vec<f64> = (0..n).map(|i| if i + 1 == n { lhi } else { llo + (lhi - llo) * i as f64 / (n - 1) as f64 }).collect();
    let ys: Vec<f64> = xs.par_iter().map(|&x| eta_at(x)).collect::<Result<_>>()?;
    let scan: Vec<(f64, f64)> = xs.iter().zip(&ys).map(|(x, y)| (x.exp().clamp(lo, hi), *y)).collect();

    let mut best = 0;
    for i in 1..n {
        if ys[i] > ys[best] {
            best = i;
        }
    }
    if !(ys[best] > 0.0) {
        return Ok(PilotOptimum { feasible: false, alpha: f64::NAN, eta: 0.0, scan });
    }
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let mut failure = None;
    let (x, y) = maximize_scalar_seeded(
        |x| {
            eta_at(x).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            })
        },
        a,
        b,
        5,
        ToleranceSpec { abs_tol: 1e-9, rel_tol: 1e-9, max_iter: 200 },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (alpha, eta) = if y >= ys[best] { (x.exp().clamp(lo, hi), y) } else { (scan[best].0, ys[best]) };
    Ok(PilotOptimum { feasible: true, alpha, eta, scan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(alpha: f64) -> SystemConfig {
        SystemConfig::new(10.0, 1.0, alpha).unwrap()
    }

    fn con(eps: f64, delta: f64) -> OutageConstraints {
        OutageConstraints::new(eps, delta).unwrap()
    }

    fn rates() -> RatePair {
        RatePair::new(2.0, 1.0).unwrap()
    }

    #[test]
    fn constraint_validation() {
        assert!(OutageConstraints::new(-0.1, 0.5).is_err());
        assert!(OutageConstraints::new(0.1, 0.0).is_err());
        assert!(OutageConstraints::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn scheme_round_trip() {
        for s in ["s1", "s2", "s3", "nonadaptive", "adaptive"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert!("s4".parse::<Scheme>().is_err());
    }

    #[test]
    fn mu_b_first_branch_example() {
        // beta_b = 1/51 with P_b = 10 needs alpha = 5.
        let s = snr_stats(&cfg(5.0)).unwrap();
        assert_relative_eq!(s.beta_b, 1.0 / 51.0, max_relative = 1e-15);
        let branch = (1.0f64 + 50.0 * 0.1 / 0.9).log2();
        assert_relative_eq!(branch, 2.713, epsilon = 1e-3);
        assert_eq!(optimal_mu_b(&s, 2.0, 0.1), (3.0, false));
        assert_eq!(optimal_mu_b(&s, 2.0, 1.0), (3.0, false));
    }

    #[test]
    fn mu_b_second_branch_meets_delta() {
        let s = snr_stats(&cfg(1.0)).unwrap();
        let (mu, binding) = optimal_mu_b(&s, 3.0, 0.05);
        assert!(binding && mu > 7.0);
        assert_relative_eq!(p_co_fixed(&s, 3.0, mu).unwrap(), 0.05, max_relative = 1e-12);
    }

    #[test]
    fn stationary_at_capacity_threshold() {
        // With the first branch active, d eta / d mu_b vanishes at mu_b = 2^R_b - 1.
        let s = snr_stats(&cfg(5.0)).unwrap();
        let rb: f64 = 2.0;
        let d = rb.exp2() - 1.0;
        let kb = s.beta_b * d / (1.0 + s.beta_b * (d - 1.0));
        let eta = |mu: f64| (-mu / s.mean_gb_hat).exp() * (1.0 - kb * ((d - mu) / (d * s.mean_gb_tilde)).exp());
        let h = 1e-5 * d;
        let slope = (eta(d + h) - eta(d - h)) / (2.0 * h);
        assert!(slope.abs() <= 1e-6 * eta(d) / d, "slope {slope}");
    }

    #[test]
    fn s1_perfect_secrecy_is_feasible() {
        let sol = solve_s1(&cfg(5.0), &rates(), &con(0.0, 0.1)).unwrap();
        assert!(sol.feasibility.feasible);
        assert_eq!(sol.report.unwrap().p_so, 0.0);
        assert_eq!(sol.thresholds.unwrap().mu_e, 1.0);
    }

    #[test]
    fn s1_root_branch_meets_eps() {
        let sol = solve_s1(&cfg(5.0), &rates(), &con(0.05, 0.1)).unwrap();
        let th = sol.thresholds.unwrap();
        assert!(th.mu_e.is_finite() && sol.binding.security);
        assert!((sol.report.unwrap().p_so - 0.05).abs() <= 1e-9);
    }

    #[test]
    fn s1_unconditional_branch() {
        let s = snr_stats(&cfg(5.0)).unwrap();
        let eps = p_so_s1_unconditional(&s, &rates()) + 1e-3;
        let sol = solve_s1(&cfg(5.0), &rates(), &con(eps, 0.1)).unwrap();
        assert!(sol.thresholds.unwrap().mu_e.is_infinite());
        assert_relative_eq!(sol.report.unwrap().p_so, eps - 1e-3, max_relative = 1e-14);
    }

    #[test]
    fn s2_feasibility_and_root() {
        let s = snr_stats(&cfg(5.0)).unwrap();
        let floor = p_so_s2_floor(&s, &rates()).unwrap();
        let infeasible = solve_s2(&cfg(5.0), &rates(), &con(floor * 0.99, 0.1)).unwrap();
        assert!(!infeasible.feasibility.feasible && infeasible.eta() == 0.0);
        let eps = floor * 1.5;
        let sol = solve_s2(&cfg(5.0), &rates(), &con(eps, 0.1)).unwrap();
        let mu_e = sol.thresholds.unwrap().mu_e;
        assert!(mu_e.is_finite() && mu_e > 0.0);
        assert!((sol.report.unwrap().p_so - eps).abs() <= 1e-9);
    }

    #[test]
    fn s2_ignores_feedback_above_s3_level() {
        let a = solve_s2(&cfg(5.0), &rates(), &con(0.4, 0.1)).unwrap();
        let b = solve_s3(&cfg(5.0), &rates(), &con(0.4, 0.1)).unwrap();
        assert!(a.thresholds.unwrap().mu_e.is_infinite());
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn s3_step_in_eps() {
        let low = solve_s3(&cfg(5.0), &rates(), &con(0.2, 0.1)).unwrap();
        assert!(!low.feasibility.feasible);
        assert!(low.feasibility.reason.as_deref().unwrap().contains("3.678794"));
        let a = solve_s3(&cfg(5.0), &rates(), &con(0.4, 0.1)).unwrap();
        let b = solve_s3(&cfg(5.0), &rates(), &con(0.9, 0.1)).unwrap();
        assert_eq!(a.eta(), b.eta());
        assert_relative_eq!(a.report.unwrap().p_so, (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn delta_one_gives_capacity_threshold() {
        let sol = solve_s3(&cfg(1.0), &RatePair::new(4.0, 1.0).unwrap(), &con(0.9, 1.0)).unwrap();
        assert_eq!(sol.thresholds.unwrap().mu_b, 15.0);
    }

    #[test]
    fn nonadaptive_pins_eps() {
        for &eps in &[0.01, 0.05, 0.3, 1.0] {
            let sol = solve_nonadaptive(&cfg(5.0), &con(eps, 0.1)).unwrap();
            let r = sol.report.unwrap();
            assert!((r.p_so - eps).abs() <= 1e-10, "eps {eps}: p_so {}", r.p_so);
            assert!(r.p_co <= 0.1 + 1e-12);
            assert!(sol.rates.unwrap().rs > 0.0);
        }
        assert!(!solve_nonadaptive(&cfg(5.0), &con(0.0, 0.1)).unwrap().feasibility.feasible);
    }

    #[test]
    fn nonadaptive_beats_dense_grid() {
        let c = cfg(1.0);
        let s = snr_stats(&c).unwrap();
        let k = secrecy_rate_offset(1.0, 0.05);
        let (lo, hi) = nonadaptive_search_interval(&s, k, 0.1).unwrap();
        let sol = solve_nonadaptive(&c, &con(0.05, 0.1)).unwrap();
        let grid_best = (0..=10_000)
            .map(|i| nonadaptive_objective(&s, k, 0.1, lo + (hi - lo) * i as f64 / 10_000.0))
            .fold(0.0, f64::max);
        assert!(sol.eta() >= grid_best - 1e-12, "{} < {grid_best}", sol.eta());
    }

    #[test]
    fn search_interval_uses_capacity_end_without_estimation_error() {
        let s = snr_stats(&cfg(f64::INFINITY)).unwrap();
        let k = 1.0;
        let (_, hi) = nonadaptive_search_interval(&s, k, 0.1).unwrap();
        // Stationary point of (R - k) exp(-(2^R - 1)/P_b).
        let u = (hi - k) * std::f64::consts::LN_2;
        assert_relative_eq!(u * hi.exp2(), s.mean_gb_hat, max_relative = 1e-12);
    }

    #[test]
    fn adaptive_threshold_example() {
        // P_b beta_b = 1 and P_e = 1 with eps = delta = 1/e.
        let c = SystemConfig::new(2.0, 1.0, 0.5).unwrap();
        let s = snr_stats(&c).unwrap();
        assert_relative_eq!(s.mean_gb_tilde, 1.0, max_relative = 1e-15);
        let e1 = (-1.0f64).exp();
        let grid = AdaptiveGrid { nodes: 16, ..AdaptiveGrid::default() };
        let p = solve_adaptive(&c, &con(e1, e1), grid).unwrap();
        assert_relative_eq!(p.mu_b, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_table_respects_bounds() {
        let c = cfg(5.0);
        let s = snr_stats(&c).unwrap();
        let p = solve_adaptive(&c, &con(0.05, 0.1), AdaptiveGrid::default()).unwrap();
        let backoff = 1.0 + s.mean_gb_tilde * 10f64.ln();
        for n in &p.rate_table[1..] {
            let hi = (n.gb_hat / backoff).ln_1p() / std::f64::consts::LN_2;
            assert!(n.rb > p.k && n.rb <= hi * (1.0 + 1e-12));
            assert!(n.rs > 0.0);
            assert!(adaptive_p_co(s.mean_gb_tilde, n.rb, n.gb_hat) <= 0.1 * (1.0 + 1e-9));
        }
        assert!(p.rate_table.windows(2).all(|w| w[1].rb >= w[0].rb));
        assert!(p.rate_for(p.mu_b).is_none());
        let (rb, rs) = p.rate_for(p.mu_b + 3.0).unwrap();
        assert_relative_eq!(rb - rs, p.k, max_relative = 1e-12);
        assert!(p.rate_for(p.mu_b + 1e3 * s.mean_gb_hat).is_some());
        assert!(p.report.p_co <= 0.1);
    }

    #[test]
    fn adaptive_eta_matches_direct_quadrature() {
        // Oracle: integrate with the exact per-point optimum instead of the table.
        let c = cfg(1.0);
        let s = snr_stats(&c).unwrap();
        let con = con(0.1, 0.1);
        let p = solve_adaptive(&c, &con, AdaptiveGrid::default()).unwrap();
        let backoff = 1.0 + s.mean_gb_tilde * 10f64.ln();
        let mut total = 0.0;
        let n = 4000;
        let top = p.mu_b + s.mean_gb_hat * 25.0;
        let h = (top - p.mu_b) / n as f64;
        for i in 0..n {
            let g = p.mu_b + (i as f64 + 0.5) * h;
            let rb = adaptive_node_rate(s.mean_gb_tilde, backoff, p.k, g).unwrap();
            total += (rb - p.k) * (1.0 - adaptive_p_co(s.mean_gb_tilde, rb, g)) * (-g / s.mean_gb_hat).exp() / s.mean_gb_hat * h;
        }
        assert_relative_eq!(p.eta, total, max_relative = 1e-4);
    }

    #[test]
    fn reliability_limit_solves_defining_equation() {
        let s = snr_stats(&cfg(1.0)).unwrap();
        let mu_b = 9.0;
        for &delta in &[0.01, 0.1, 0.5] {
            let x = reliability_rate_limit(&s, mu_b, delta).unwrap();
            let kb = s.beta_b * x / (s.beta_b * x + 1.0 - s.beta_b);
            let rhs = x * (1.0 - s.mean_gb_tilde * (delta / kb).ln());
            assert_relative_eq!(rhs, mu_b, max_relative = 1e-10);
        }
        let a = reliability_rate_limit(&s, mu_b, 0.01).unwrap();
        let b = reliability_rate_limit(&s, mu_b, 0.5).unwrap();
        assert!(b > a);
    }

    #[test]
    fn pinned_feasibility_loose_delta() {
        let s = snr_stats(&cfg(1.0)).unwrap();
        let r = nonadaptive_feasibility_pinned(&s, 9.0, &con(0.5, 0.9)).unwrap();
        assert_relative_eq!(r.eps_bound.unwrap(), (-9.0f64).exp(), max_relative = 1e-14);
        let strict = nonadaptive_feasibility_pinned(&s, 9.0, &con(0.5, 1e-4)).unwrap();
        assert!(strict.eps_bound.unwrap() > r.eps_bound.unwrap());
    }

    #[test]
    fn scenario_ordering() {
        for &alpha in &[1.0, 5.0, f64::INFINITY] {
            for &eps in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.6] {
                let c = con(eps, 0.1);
                let e1 = solve_s1(&cfg(alpha), &rates(), &c).unwrap().eta();
                let e2 = solve_s2(&cfg(alpha), &rates(), &c).unwrap().eta();
                let e3 = solve_s3(&cfg(alpha), &rates(), &c).unwrap().eta();
                assert!(e1 >= e2 - 1e-12 && e2 >= e3 - 1e-12, "alpha {alpha} eps {eps}: {e1} {e2} {e3}");
            }
        }
    }

    #[test]
    fn nonadaptive_dominates_fixed_pairs() {
        let c = cfg(5.0);
        let cons = con(0.4, 0.1);
        let best = solve_nonadaptive(&c, &cons).unwrap().eta();
        for &(rb, rs) in &[(2.0, 1.0), (3.0, 1.5), (1.5, 0.2), (4.0, 3.0)] {
            let fixed = solve_s3(&c, &RatePair::new(rb, rs).unwrap(), &cons).unwrap().eta();
            assert!(best >= fixed - 1e-12, "({rb}, {rs}): {fixed} > {best}");
        }
    }

    #[test]
    fn pilot_optimum_interior_for_s1() {
        let opt = optimize_pilot_power(Scheme::Fixed(Scenario::S1), &cfg(1.0), Some(&rates()), &con(0.05, 0.1), (1e-2, 1e3))
            .unwrap();
        assert!(opt.feasible && (opt.alpha - 2.28).abs() < 0.5, "alpha* = {}", opt.alpha);
        assert!(opt.scan.iter().all(|&(_, e)| e <= opt.eta + 1e-12));
    }

    #[test]
    fn min_eps_inverts_throughput() {
        let c = cfg(5.0);
        for scheme in [Scheme::NonAdaptive, Scheme::Adaptive] {
            let eps = min_eps_for_throughput(scheme, &c, 0.1, 0.5, 1e-6).unwrap().unwrap();
            let eta = optimal_throughput(scheme, &c, None, &con(eps, 0.1)).unwrap();
            assert_relative_eq!(eta, 0.5, max_relative = 1e-8);
            assert!(min_eps_for_throughput(scheme, &c, 0.1, 10.0, 1e-6).unwrap().is_none());
        }
    }

    #[test]
    fn pilot_optimum_infeasible_everywhere() {
        let opt = optimize_pilot_power(Scheme::Fixed(Scenario::S3), &cfg(1.0), Some(&rates()), &con(0.1, 0.1), (1e-2, 1e3))
            .unwrap();
        assert!(!opt.feasible && opt.eta == 0.0);
    }
}
