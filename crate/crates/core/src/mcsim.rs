//! Monte-Carlo estimator for the on-off schemes.
//!
//! Blocks are split into fixed-size batches; batch `i` draws from the ChaCha8
//! stream `i` of the master seed, and batch accumulators are merged in batch
//! order. Results are therefore bit-identical for any thread count.

use crate::channel::{sample_block, snr_stats, EstimationStats, Scenario, SystemConfig};
use crate::design::AdaptivePolicy;
use crate::error::{Error, Result};
use crate::outage::{s2_conditional_exceedance, RatePair, Thresholds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Blocks per random stream.
pub const BATCH_SIZE: u64 = 1 << 16;

/// Smallest accepted run length.
pub const MIN_BLOCKS: u64 = 10_000;

/// What the transmitter does in each block.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Fixed { thresholds: Thresholds, rates: RatePair },
    Adaptive(&'a AdaptivePolicy),
}

impl Policy<'_> {
    /// Rates for this block, or `None` to stay silent.
    fn decide(&self, scenario: Scenario, gb_hat: f64, ge_hat: f64) -> Option<(f64, f64)> {
        match self {
            Policy::Fixed { thresholds, rates } => {
                let eve_ok = !scenario.has_eve_feedback() || ge_hat < thresholds.mu_e;
                (gb_hat > thresholds.mu_b && eve_ok).then_some((rates.rb, rates.rs))
            }
            Policy::Adaptive(p) => p.rate_for(gb_hat),
        }
    }
}

/// Empirical performance with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub n_blocks: u64,
    pub n_tx: u64,
    pub n_co: u64,
    pub n_so: u64,
    pub p_tx: f64,
    pub p_co: f64,
    pub p_so: f64,
    pub eta: f64,
    pub se_p_tx: f64,
    pub se_p_co: f64,
    pub se_p_so: f64,
    pub se_eta: f64,
    /// No block was transmitted, so `p_co` and `p_so` are undefined (NaN).
    pub degenerate: bool,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    n: u64,
    tx: u64,
    co: u64,
    so: u64,
    bits: f64,
    bits_sq: f64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.n += o.n;
        self.tx += o.tx;
        self.co += o.co;
        self.so += o.so;
        self.bits += o.bits;
        self.bits_sq += o.bits_sq;
        self
    }
}

fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

fn batches(n: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let count = n.div_ceil(BATCH_SIZE) as usize;
    (0..count).into_par_iter().map(move |b| {
        let b = b as u64;
        (b, BATCH_SIZE.min(n - b * BATCH_SIZE))
    })
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Simulates `n_blocks` independent blocks under `policy`.
///
/// Use [`Scenario::S3`] for the joint-design schemes, which assume no
/// feedback from Eve.
pub fn estimate_performance(
    cfg: &SystemConfig,
    scenario: Scenario,
    policy: &Policy<'_>,
    n_blocks: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_blocks < MIN_BLOCKS {
        return Err(Error::Precondition(format!("need at least {MIN_BLOCKS} blocks, got {n_blocks}")));
    }
    let stats = snr_stats(cfg)?;
    let tallies: Vec<Tally> = batches(n_blocks)
        .map(|(b, len)| {
            let mut rng = batch_rng(seed, b);
            let mut t = Tally { n: len, ..Tally::default() };
            for _ in 0..len {
                let draw = sample_block(&stats, scenario, &mut rng);
                let Some((rb, rs)) = policy.decide(scenario, draw.gb_hat, draw.ge_hat) else {
                    continue;
                };
                t.tx += 1;
                if draw.gb < rb.exp2() - 1.0 {
                    t.co += 1;
                } else {
                    t.bits += rs;
                    t.bits_sq += rs * rs;
                }
                if draw.ge > (rb - rs).exp2() - 1.0 {
                    t.so += 1;
                }
            }
            t
        })
        .collect();
    let t = tallies.into_iter().fold(Tally::default(), Tally::merge);

    let n = t.n as f64;
    let p_tx = t.tx as f64 / n;
    let degenerate = t.tx == 0;
    let (p_co, p_so) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        (t.co as f64 / t.tx as f64, t.so as f64 / t.tx as f64)
    };
    let overhead = cfg.overhead_factor();
    let mean_bits = t.bits / n;
    let var_bits = (t.bits_sq / n - mean_bits * mean_bits).max(0.0) * n / (n - 1.0);
    Ok(McEstimate {
        n_blocks: t.n,
        n_tx: t.tx,
        n_co: t.co,
        n_so: t.so,
        p_tx,
        p_co,
        p_so,
        eta: overhead * mean_bits,
        se_p_tx: binomial_se(p_tx, t.n),
        se_p_co: binomial_se(p_co, t.tx),
        se_p_so: binomial_se(p_so, t.tx),
        se_eta: overhead * (var_bits / n).sqrt(),
        degenerate,
    })
}

/// One bin of Eve's fed-back estimate in the conditional-law check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawBin {
    pub lo: f64,
    /// `f64::INFINITY` for the last bin.
    pub hi: f64,
    pub count: u64,
    /// Mean of the estimates that fell in the bin.
    pub centroid: f64,
    pub empirical: f64,
    /// Conditional exceedance averaged over the bin's estimates.
    pub predicted: f64,
    /// Conditional exceedance at the bin centroid.
    pub at_centroid: f64,
    pub se: f64,
    pub z: f64,
}

/// Outcome of [`validate_conditional_law_s2`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalLawReport {
    pub eve_snr_threshold: f64,
    pub bins: Vec<LawBin>,
    pub empty_bins: usize,
    pub max_abs_z: f64,
}

impl ConditionalLawReport {
    /// All bins populated and within `z_max` standard errors.
    pub fn passed(&self, z_max: f64) -> bool {
        self.empty_bins == 0 && self.max_abs_z <= z_max
    }
}

#[derive(Clone, Default)]
struct BinTally {
    count: u64,
    exceed: u64,
    sum_g: f64,
    sum_q: f64,
}

/// Checks the Scenario 2 law of Eve's actual SNR given her fed-back estimate
/// against sampled channels.
///
/// Estimates are binned into `n_bins` equiprobable bins. Per bin, the
/// empirical exceedance of `2^(R_b - R_s) - 1` is compared with the mean of
/// the closed-form conditional exceedance over the same draws, with binomial
/// standard errors under the closed form.
pub fn validate_conditional_law_s2(
    cfg: &SystemConfig,
    rates: &RatePair,
    n_samples: u64,
    n_bins: usize,
    seed: u64,
) -> Result<ConditionalLawReport> {
    if n_bins < 1 {
        return Err(Error::Precondition("need at least one bin".into()));
    }
    if n_samples < MIN_BLOCKS {
        return Err(Error::Precondition(format!("need at least {MIN_BLOCKS} samples, got {n_samples}")));
    }
    let stats = snr_stats(cfg)?;
    let c = rates.eve_snr_threshold();
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { f64::INFINITY } else { -stats.mean_ge_hat * (-(i as f64) / n_bins as f64).ln_1p() })
        .collect();

    let per_batch: Vec<Result<Vec<BinTally>>> = batches(n_samples)
        .map(|(b, len)| {
            let mut rng = batch_rng(seed, b);
            let mut bins = vec![BinTally::default(); n_bins];
            for _ in 0..len {
                let draw = sample_block(&stats, Scenario::S2, &mut rng);
                let j = edges.partition_point(|&e| e <= draw.ge_hat).clamp(1, n_bins) - 1;
                let bin = &mut bins[j];
                bin.count += 1;
                bin.exceed += u64::from(draw.ge > c);
                bin.sum_g += draw.ge_hat;
                bin.sum_q += s2_conditional_exceedance(&stats, c, draw.ge_hat)?;
            }
            Ok(bins)
        })
        .collect();
    let mut acc = vec![BinTally::default(); n_bins];
    for batch in per_batch {
        for (a, b) in acc.iter_mut().zip(batch?) {
            a.count += b.count;
            a.exceed += b.exceed;
            a.sum_g += b.sum_g;
            a.sum_q += b.sum_q;
        }
    }
    law_report(&stats, c, &edges, acc)
}

fn law_report(stats: &EstimationStats, c: f64, edges: &[f64], acc: Vec<BinTally>) -> Result<ConditionalLawReport> {
    let mut bins = Vec::with_capacity(acc.len());
    let mut empty_bins = 0;
    let mut max_abs_z: f64 = 0.0;
    for (j, t) in acc.into_iter().enumerate() {
        if t.count == 0 {
            empty_bins += 1;
            bins.push(LawBin {
                lo: edges[j],
                hi: edges[j + 1],
                count: 0,
                centroid: f64::NAN,
                empirical: f64::NAN,
                predicted: f64::NAN,
                at_centroid: f64::NAN,
                se: f64::NAN,
                z: f64::NAN,
            });
            continue;
        }
        let n = t.count as f64;
        let centroid = t.sum_g / n;
        let empirical = t.exceed as f64 / n;
        let predicted = t.sum_q / n;
        let se = binomial_se(predicted, t.count);
        let z = if se > 0.0 {
            (empirical - predicted) / se
        } else if (empirical - predicted).abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_abs_z = max_abs_z.max(z.abs());
        bins.push(LawBin {
            lo: edges[j],
            hi: edges[j + 1],
            count: t.count,
            centroid,
            empirical,
            predicted,
            at_centroid: s2_conditional_exceedance(stats, c, centroid)?,
            se,
            z,
        });
    }
    Ok(ConditionalLawReport { eve_snr_threshold: c, bins, empty_bins, max_abs_z })
}
