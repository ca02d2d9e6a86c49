//! Subcommand implementations. Each returns the table to emit and the
//! process exit code.

use crate::config::{OutputArgs, Resolver, RunConfig, SystemArgs};
use crate::output::{Cell, Table};
use crate::{EXIT_DEGENERATE, EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION};
use anyhow::{anyhow, bail, Result};
use clap::Args;
use secure_onoff::channel::Scenario;
use secure_onoff::design::{optimize_pilot_power, solve_adaptive, solve_fixed, solve_nonadaptive, AdaptiveGrid, Scheme};
use secure_onoff::mcsim::{estimate_performance, Policy};
use secure_onoff::outage::PerformanceReport;

pub struct Outcome {
    pub table: Table,
    pub code: u8,
    /// Printed on standard error.
    pub diagnosis: Option<String>,
}

fn input_fields(run: &RunConfig) -> Vec<(&'static str, Cell)> {
    vec![
        ("scenario", run.scheme.to_string().into()),
        ("pb_db", run.pb_db.into()),
        ("pe_db", run.pe_db.into()),
        ("alpha", run.cfg.alpha.into()),
        ("eps", run.con.eps.into()),
        ("delta", run.con.delta.into()),
        ("theta", run.cfg.theta.into()),
    ]
}

/// One design record plus whether the design is feasible.
pub fn design_record(run: &RunConfig) -> Result<(Vec<(&'static str, Cell)>, bool)> {
    let mut fields = input_fields(run);
    let feasible;
    match run.scheme {
        Scheme::Adaptive => {
            if run.con.eps > 0.0 {
                let p = solve_adaptive(&run.cfg, &run.con, AdaptiveGrid::default())?;
                feasible = true;
                fields.extend([
                    ("feasible", true.into()),
                    ("reason", Cell::Empty),
                    ("eps_bound", 0.0.into()),
                    ("mu_b", p.mu_b.into()),
                    ("mu_e", f64::INFINITY.into()),
                    ("rb", Cell::Empty),
                    ("rs", Cell::Empty),
                    ("k", p.k.into()),
                ]);
                push_report(&mut fields, Some(&p.report));
                fields.extend([("reliability_binding", Cell::Empty), ("security_binding", true.into())]);
            } else {
                feasible = false;
                fields.extend([
                    ("feasible", false.into()),
                    ("reason", "joint rate design needs eps > 0".into()),
                    ("eps_bound", 0.0.into()),
                    ("mu_b", Cell::Empty),
                    ("mu_e", Cell::Empty),
                    ("rb", Cell::Empty),
                    ("rs", Cell::Empty),
                    ("k", Cell::Empty),
                ]);
                push_report(&mut fields, None);
                fields.extend([("reliability_binding", Cell::Empty), ("security_binding", Cell::Empty)]);
            }
        }
        scheme => {
            let sol = match scheme {
                Scheme::Fixed(sc) => solve_fixed(&run.cfg, sc, run.rates.as_ref().expect("resolved"), &run.con)?,
                _ => solve_nonadaptive(&run.cfg, &run.con)?,
            };
            feasible = sol.feasibility.feasible;
            let k = match scheme {
                Scheme::NonAdaptive => sol.rates.map(|r| r.redundancy()),
                _ => None,
            };
            fields.extend([
                ("feasible", feasible.into()),
                ("reason", sol.feasibility.reason.clone().map_or(Cell::Empty, Cell::Text)),
                ("eps_bound", sol.feasibility.eps_bound.into()),
                ("mu_b", sol.thresholds.map(|t| t.mu_b).into()),
                ("mu_e", sol.thresholds.map(|t| t.mu_e).into()),
                ("rb", sol.rates.map(|r| r.rb).into()),
                ("rs", sol.rates.map(|r| r.rs).into()),
                ("k", k.into()),
            ]);
            push_report(&mut fields, sol.report.as_ref());
            let bind = |b: bool| if feasible { Cell::Bool(b) } else { Cell::Empty };
            fields.extend([
                ("reliability_binding", bind(sol.binding.reliability)),
                ("security_binding", bind(sol.binding.security)),
            ]);
        }
    }
    Ok((fields, feasible))
}

fn push_report(fields: &mut Vec<(&'static str, Cell)>, r: Option<&PerformanceReport>) {
    fields.extend([
        ("p_tx", r.map(|r| r.p_tx).into()),
        ("p_co", r.map(|r| r.p_co).into()),
        ("p_so", r.map(|r| r.p_so).into()),
        ("eta", r.map_or(0.0, |r| r.eta).into()),
    ]);
}

pub fn design(resolver: &Resolver) -> Result<Outcome> {
    let run = resolver.run_config()?;
    let (fields, feasible) = design_record(&run)?;
    let diagnosis = if feasible {
        None
    } else {
        fields.iter().find(|(k, _)| *k == "reason").and_then(|(_, v)| match v {
            Cell::Text(s) => Some(format!("infeasible: {s}")),
            _ => None,
        })
    };
    Ok(Outcome { table: Table::record(fields), code: if feasible { EXIT_OK } else { EXIT_INFEASIBLE }, diagnosis })
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Swept variable: alpha, eps, delta, pb-db, pe-db, rb, rs or theta.
    #[arg(long)]
    pub axis: Option<String>,
    /// Log-spaced grid: LO HI POINTS.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "POINTS"], allow_hyphen_values = true, conflicts_with = "lin")]
    pub log: Option<Vec<f64>>,
    /// Evenly spaced grid: LO HI POINTS.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "POINTS"], allow_hyphen_values = true)]
    pub lin: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// linear or log.
    #[arg(long)]
    pub spacing: Option<String>,
}

/// Grid points, `lo` and `hi` included.
pub fn grid(lo: f64, hi: f64, points: usize, log: bool) -> Result<Vec<f64>> {
    if points < 1 || !lo.is_finite() || !hi.is_finite() {
        bail!("grid needs finite bounds and at least one point");
    }
    if log && !(lo > 0.0 && hi > 0.0) {
        bail!("log grid needs positive bounds, got [{lo}, {hi}]");
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / last;
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else if log {
                (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect())
}

fn set_axis(sys: &mut SystemArgs, axis: &str, v: f64) -> Result<()> {
    match axis {
        "alpha" => sys.alpha = Some(v),
        "eps" => sys.eps = Some(v),
        "delta" => sys.delta = Some(v),
        "pb-db" | "pb_db" => sys.pb_db = Some(v),
        "pe-db" | "pe_db" => sys.pe_db = Some(v),
        "rb" => sys.rb = Some(v),
        "rs" => sys.rs = Some(v),
        "theta" => sys.theta = Some(v),
        other => bail!("unknown sweep axis '{other}'"),
    }
    Ok(())
}

pub fn sweep(resolver: &Resolver, args: &SweepArgs) -> Result<Outcome> {
    let f = &resolver.file;
    let axis = args.axis.clone().or_else(|| f.axis.clone()).ok_or_else(|| anyhow!("missing --axis"))?;
    let (lo, hi, points, log) = match (&args.log, &args.lin) {
        (Some(v), None) => (v[0], v[1], v[2], true),
        (None, Some(v)) => (v[0], v[1], v[2], false),
        _ => {
            let spacing = args.spacing.clone().or_else(|| f.spacing.clone()).unwrap_or_else(|| "linear".into());
            let log = match spacing.as_str() {
                "log" => true,
                "linear" | "lin" => false,
                other => bail!("unknown spacing '{other}' (linear or log)"),
            };
            let lo = args.lo.or(f.lo).ok_or_else(|| anyhow!("missing grid: --log/--lin or --lo/--hi/--points"))?;
            let hi = args.hi.or(f.hi).ok_or_else(|| anyhow!("missing --hi"))?;
            let points = args.points.or(f.points).ok_or_else(|| anyhow!("missing --points"))?;
            (lo, hi, points as f64, log)
        }
    };
    if points.fract() != 0.0 || points < 1.0 {
        bail!("grid point count must be a positive integer, got {points}");
    }
    let values = grid(lo, hi, points as usize, log)?;
    let mut table = Table::default();
    for v in values {
        let mut sys = resolver.sys.clone();
        set_axis(&mut sys, &axis, v)?;
        let run = Resolver { file: resolver.file.clone(), sys }.run_config()?;
        let (mut fields, _) = design_record(&run)?;
        fields.insert(0, ("axis_value", v.into()));
        let row = Table::record(fields);
        table.extend(row);
    }
    table.columns[0] = axis.replace('-', "_");
    Ok(Outcome { table, code: EXIT_OK, diagnosis: None })
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub n_blocks: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scales every closed-form value by (1 + REL) before comparison; used to
    /// check that the validator detects discrepancies.
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub perturb: Option<f64>,
}

pub const DEFAULT_BLOCKS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

pub fn mc_validate(resolver: &Resolver, args: &McArgs) -> Result<Outcome> {
    let run = resolver.run_config()?;
    let n = args.n_blocks.or(resolver.file.n_blocks).unwrap_or(DEFAULT_BLOCKS);
    let seed = args.seed.or(resolver.file.seed).unwrap_or(DEFAULT_SEED);
    let scale = 1.0 + args.perturb.unwrap_or(0.0);
    let header = ["quantity", "closed_form", "mc_estimate", "se", "z_score"];

    let adaptive;
    let (scenario, policy, report) = match run.scheme {
        Scheme::Adaptive => {
            if !(run.con.eps > 0.0) {
                return infeasible(header, "joint rate design needs eps > 0".into());
            }
            adaptive = solve_adaptive(&run.cfg, &run.con, AdaptiveGrid::default())?;
            (Scenario::S3, Policy::Adaptive(&adaptive), adaptive.report)
        }
        scheme => {
            let (sc, sol) = match scheme {
                Scheme::Fixed(sc) => (sc, solve_fixed(&run.cfg, sc, run.rates.as_ref().expect("resolved"), &run.con)?),
                _ => (Scenario::S3, solve_nonadaptive(&run.cfg, &run.con)?),
            };
            match (sol.thresholds, sol.rates, sol.report) {
                (Some(thresholds), Some(rates), Some(report)) => (sc, Policy::Fixed { thresholds, rates }, report),
                _ => return infeasible(header, sol.feasibility.reason.unwrap_or_default()),
            }
        }
    };
    let mc = estimate_performance(&run.cfg, scenario, &policy, n, seed)?;
    if mc.degenerate {
        return Ok(Outcome {
            table: Table::default(),
            code: EXIT_DEGENERATE,
            diagnosis: Some(format!(
                "degenerate estimate: none of the {n} blocks was transmitted (closed-form p_tx = {:e}); \
                 increase --n-blocks or relax the thresholds",
                report.p_tx
            )),
        });
    }
    let mut table = Table::new(header);
    let mut worst: f64 = 0.0;
    for (name, cf, est, se) in [
        ("p_tx", report.p_tx, mc.p_tx, mc.se_p_tx),
        ("p_co", report.p_co, mc.p_co, mc.se_p_co),
        ("p_so", report.p_so, mc.p_so, mc.se_p_so),
        ("eta", report.eta, mc.eta, mc.se_eta),
    ] {
        let cf = cf * scale;
        let diff = est - cf;
        let z = if diff.abs() <= 1e-12 {
            0.0
        } else if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY.copysign(diff)
        };
        worst = worst.max(z.abs());
        table.push(vec![name.into(), cf.into(), est.into(), se.into(), z.into()]);
    }
    let ok = worst <= 3.0;
    Ok(Outcome {
        table,
        code: if ok { EXIT_OK } else { EXIT_VALIDATION },
        diagnosis: (!ok).then(|| format!("closed form and simulation disagree: max |z| = {worst:.2} > 3")),
    })
}

fn infeasible(header: [&str; 5], reason: String) -> Result<Outcome> {
    Ok(Outcome { table: Table::new(header), code: EXIT_INFEASIBLE, diagnosis: Some(format!("infeasible: {reason}")) })
}

#[derive(Debug, Clone, Args)]
pub struct PilotArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long)]
    pub alpha_lo: Option<f64>,
    #[arg(long)]
    pub alpha_hi: Option<f64>,
    /// Emit the coarse alpha scan instead of the optimum.
    #[arg(long)]
    pub scan: bool,
}

pub fn optimize_pilot(resolver: &Resolver, args: &PilotArgs) -> Result<Outcome> {
    let run = resolver.run_config()?;
    let lo = args.alpha_lo.or(resolver.file.alpha_lo).unwrap_or(1e-2);
    let hi = args.alpha_hi.or(resolver.file.alpha_hi).unwrap_or(1e3);
    let opt = optimize_pilot_power(run.scheme, &run.cfg, run.rates.as_ref(), &run.con, (lo, hi))?;
    let table = if args.scan {
        let mut t = Table::new(["alpha", "throughput"]);
        for (a, e) in &opt.scan {
            t.push(vec![(*a).into(), (*e).into()]);
        }
        t
    } else {
        let mut fields = input_fields(&run);
        fields.retain(|(k, _)| *k != "alpha");
        fields.extend([
            ("rb", run.rates.map(|r| r.rb).into()),
            ("rs", run.rates.map(|r| r.rs).into()),
            ("alpha_lo", lo.into()),
            ("alpha_hi", hi.into()),
            ("feasible", opt.feasible.into()),
            ("alpha_star", if opt.feasible { Cell::Num(opt.alpha) } else { Cell::Empty }),
            ("eta_star", opt.eta.into()),
        ]);
        Table::record(fields)
    };
    Ok(Outcome {
        table,
        code: if opt.feasible { EXIT_OK } else { EXIT_INFEASIBLE },
        diagnosis: (!opt.feasible).then(|| format!("infeasible at every alpha in [{lo}, {hi}]")),
    })
}
