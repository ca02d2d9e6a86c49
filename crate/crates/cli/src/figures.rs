//! Data series behind the evaluation figures, one CSV table per figure.

use crate::commands::grid;
use crate::output::{Cell, Table};
use anyhow::{bail, Result};
use secure_onoff::channel::{db_to_linear, snr_stats, Scenario, SystemConfig};
use secure_onoff::design::{
    min_eps_for_throughput, nonadaptive_feasibility_pinned, optimal_throughput, solve_fixed, OutageConstraints,
    Scheme,
};
use secure_onoff::outage::RatePair;

pub const FIGURE_IDS: std::ops::RangeInclusive<u32> = 1..=8;

fn cfg(pb_db: f64, alpha: f64) -> Result<SystemConfig> {
    Ok(SystemConfig::new(db_to_linear(pb_db), 1.0, alpha)?)
}

fn rates() -> RatePair {
    RatePair::new(2.0, 1.0).expect("valid rates")
}

/// Builds the table for figure `id`. `points` overrides the grid density.
pub fn figure(id: u32, points: Option<usize>) -> Result<Table> {
    match id {
        1 => pilot_sweep(Scenario::S1, points.unwrap_or(64)),
        2 => pilot_sweep(Scenario::S2, points.unwrap_or(64)),
        3 => scenario_comparison(points.unwrap_or(101)),
        4 => constraint_surface(Scheme::Fixed(Scenario::S3), points.unwrap_or(21)),
        5 => feasibility_frontier(points.unwrap_or(101)),
        6 => joint_vs_eps(points.unwrap_or(20)),
        7 => eps_vs_pilot(points.unwrap_or(24)),
        8 => constraint_surface(Scheme::NonAdaptive, points.unwrap_or(21)),
        other => bail!("unknown figure id {other}; expected 1 to 8"),
    }
}

fn pilot_sweep(sc: Scenario, points: usize) -> Result<Table> {
    let con = OutageConstraints::new(0.05, 0.1)?;
    let mut t = Table::new(["alpha", "throughput", "Pb_dB"]);
    for pb_db in [5.0, 10.0, 15.0, 20.0] {
        for alpha in grid(1e-2, 1e3, points, true)? {
            let eta = solve_fixed(&cfg(pb_db, alpha)?, sc, &rates(), &con)?.eta();
            t.push(vec![alpha.into(), eta.into(), pb_db.into()]);
        }
    }
    Ok(t)
}

fn scenario_comparison(points: usize) -> Result<Table> {
    let mut t = Table::new(["eps", "throughput", "scenario", "alpha"]);
    for alpha in [1.0, 5.0, f64::INFINITY] {
        let c = cfg(10.0, alpha)?;
        for sc in Scenario::ALL {
            for eps in grid(0.0, 1.0, points, false)? {
                let eta = solve_fixed(&c, sc, &rates(), &OutageConstraints::new(eps, 0.1)?)?.eta();
                t.push(vec![eps.into(), eta.into(), sc.to_string().into(), alpha.into()]);
            }
        }
    }
    Ok(t)
}

fn constraint_surface(scheme: Scheme, points: usize) -> Result<Table> {
    let c = cfg(10.0, 5.0)?;
    let mut t = Table::new(["eps", "delta", "throughput"]);
    for delta in grid(0.01, 1.0, points, false)? {
        for eps in grid(0.01, 1.0, points, false)? {
            let r = rates();
            let eta = optimal_throughput(scheme, &c, scheme.needs_rates().then_some(&r), &OutageConstraints::new(eps, delta)?)?;
            t.push(vec![eps.into(), delta.into(), eta.into()]);
        }
    }
    Ok(t)
}

fn feasibility_frontier(points: usize) -> Result<Table> {
    let mu_b = 9.0;
    let mut t = Table::new(["delta", "eps_min", "alpha"]);
    for alpha in [1.0, 5.0, f64::INFINITY] {
        let stats = snr_stats(&cfg(10.0, alpha)?)?;
        for delta in grid(1e-4, 1.0, points, true)? {
            let r = nonadaptive_feasibility_pinned(&stats, mu_b, &OutageConstraints::new(1.0, delta)?)?;
            t.push(vec![delta.into(), r.eps_bound.into(), alpha.into()]);
        }
    }
    Ok(t)
}

fn joint_vs_eps(points: usize) -> Result<Table> {
    let mut t = Table::new(["eps", "throughput", "scheme", "alpha"]);
    for alpha in [1.0, 5.0] {
        let c = cfg(10.0, alpha)?;
        for scheme in [Scheme::NonAdaptive, Scheme::Adaptive] {
            for eps in grid(0.01, 1.0, points, false)? {
                let eta = optimal_throughput(scheme, &c, None, &OutageConstraints::new(eps, 0.1)?)?;
                t.push(vec![eps.into(), eta.into(), scheme.to_string().into(), alpha.into()]);
            }
        }
    }
    Ok(t)
}

fn eps_vs_pilot(points: usize) -> Result<Table> {
    let mut t = Table::new(["alpha", "eps_min", "target_throughput", "scheme"]);
    for target in [0.2, 0.5] {
        for scheme in [Scheme::NonAdaptive, Scheme::Adaptive] {
            for alpha in grid(0.1, 100.0, points, true)? {
                let eps = min_eps_for_throughput(scheme, &cfg(10.0, alpha)?, 0.1, target, 1e-8)?;
                t.push(vec![alpha.into(), eps.map_or(Cell::Empty, Cell::Num), target.into(), scheme.to_string().into()]);
            }
        }
    }
    Ok(t)
}
