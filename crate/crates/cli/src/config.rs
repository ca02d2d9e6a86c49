//! Run configuration: a flat JSON file whose keys mirror the flag names,
//! overridden by flags given on the command line.

use crate::output::Format;
use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use secure_onoff::channel::{db_to_linear, SystemConfig};
use secure_onoff::design::{OutageConstraints, Scheme};
use secure_onoff::outage::RatePair;
use serde::{Deserialize, Deserializer};
use std::path::{Path, PathBuf};

/// Parses a positive number or `inf`.
pub fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|e| format!("invalid number '{s}': {e}")),
    }
}

fn alpha_from_json<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(x)) => Ok(Some(x)),
        Some(Raw::Text(s)) => parse_alpha(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

/// Keys accepted in a config file. Unknown keys are rejected.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    #[serde(alias = "scheme")]
    pub scenario: Option<String>,
    pub pb_db: Option<f64>,
    pub pe_db: Option<f64>,
    #[serde(default, deserialize_with = "alpha_from_json")]
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub rb: Option<f64>,
    pub rs: Option<f64>,
    pub theta: Option<f64>,
    pub pilot_len: Option<u32>,
    pub axis: Option<String>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<String>,
    pub n_blocks: Option<u64>,
    pub seed: Option<u64>,
    pub alpha_lo: Option<f64>,
    pub alpha_hi: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// System and constraint flags shared by all per-design commands.
#[derive(Debug, Clone, Default, Args)]
pub struct SystemArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// s1, s2, s3 (fixed rates) or nonadaptive, adaptive (joint design).
    #[arg(long, visible_alias = "scheme")]
    pub scenario: Option<String>,
    /// Bob's average data SNR in dB [default: 10].
    #[arg(long, allow_hyphen_values = true)]
    pub pb_db: Option<f64>,
    /// Eve's average data SNR in dB [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub pe_db: Option<f64>,
    /// Pilot-to-data power ratio, or `inf` for perfect estimation [default: 1].
    #[arg(long, value_parser = parse_alpha)]
    pub alpha: Option<f64>,
    /// Secrecy outage bound [default: 0.05].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Connection outage bound [default: 0.1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Codeword rate (fixed-rate scenarios).
    #[arg(long)]
    pub rb: Option<f64>,
    /// Confidential rate (fixed-rate scenarios).
    #[arg(long)]
    pub rs: Option<f64>,
    /// Pilot and feedback overhead relative to data time [default: 0].
    #[arg(long)]
    pub theta: Option<f64>,
    /// Pilot length in symbols [default: 1].
    #[arg(long)]
    pub pilot_len: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Write the result to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Fully resolved inputs of one design.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub pb_db: f64,
    pub pe_db: f64,
    pub cfg: SystemConfig,
    pub con: OutageConstraints,
    pub rates: Option<RatePair>,
}

/// Merges flags over the config file (if any) and applies defaults.
pub struct Resolver {
    pub file: FileConfig,
    pub sys: SystemArgs,
}

impl Resolver {
    pub fn new(sys: SystemArgs) -> Result<Self> {
        let file = match &sys.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Self { file, sys })
    }

    pub fn output(&self, args: &OutputArgs) -> (Format, Option<PathBuf>) {
        let format = args.format.or(self.file.format).unwrap_or(Format::Csv);
        (format, args.out.clone().or_else(|| self.file.out.clone()))
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let (s, f) = (&self.sys, &self.file);
        let scheme_text = s
            .scenario
            .clone()
            .or_else(|| f.scenario.clone())
            .ok_or_else(|| anyhow!("missing --scenario (s1, s2, s3, nonadaptive or adaptive)"))?;
        let scheme: Scheme = scheme_text.parse().map_err(|e| anyhow!("{e}"))?;
        let pb_db = s.pb_db.or(f.pb_db).unwrap_or(10.0);
        let pe_db = s.pe_db.or(f.pe_db).unwrap_or(0.0);
        let alpha = s.alpha.or(f.alpha).unwrap_or(1.0);
        let theta = s.theta.or(f.theta).unwrap_or(0.0);
        let pilot_len = s.pilot_len.or(f.pilot_len).unwrap_or(1);
        let cfg = SystemConfig::new(db_to_linear(pb_db), db_to_linear(pe_db), alpha)
            .and_then(|c| c.with_theta(theta))
            .and_then(|c| c.with_pilot_len(pilot_len))?;
        let con = OutageConstraints::new(s.eps.or(f.eps).unwrap_or(0.05), s.delta.or(f.delta).unwrap_or(0.1))?;
        let rates = match (s.rb.or(f.rb), s.rs.or(f.rs)) {
            (Some(rb), Some(rs)) => Some(RatePair::new(rb, rs)?),
            (None, None) => None,
            _ => bail!("--rb and --rs must be given together"),
        };
        if scheme.needs_rates() && rates.is_none() {
            bail!("scenario {scheme} needs fixed rates: pass --rb and --rs");
        }
        Ok(RunConfig { scheme, pb_db, pe_db, cfg, con, rates: if scheme.needs_rates() { rates } else { None } })
    }
}
