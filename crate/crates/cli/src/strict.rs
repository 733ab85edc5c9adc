//! Search for an allocation of a one-atom economy that lies in the ex-post
//! core but is not a rational expectations equilibrium allocation.
//!
//! Candidates are Pareto optimal allocations of single-state economies with
//! one atomless type and one atom: for a price `p` on a grid, both types
//! demand at `p` with the wealth split that clears the market. Such an
//! allocation can only be an equilibrium allocation at its own supporting
//! price `p`, so failing the Bayesian check there rules out every price.

use std::path::Path;

use ecl_core::blocking::{expost_core_check, ExpostOptions, ExpostVerdict};
use ecl_core::generate::{generate_economy, GenOptions};
use ecl_core::ree::{verify_bayes_ree, ReeOptions};
use ecl_core::walras::{walras_selection, WalrasOptions};
use ecl_core::{aggregate_endowment, Allocation, Economy, PriceSystem};
use serde_json::{json, Value};

use crate::commands::{expost_report_value, ree_report_value};
use crate::files::{allocation_value, economy_value, prices_value, write_json};
use crate::json::{num, nums};
use crate::{CliError, Outcome, EXIT_UNDECIDED};

/// Grid step of the exhaustive oracle run on every candidate.
pub const ORACLE_STEP: f64 = 0.05;

pub fn strict_options(seed: u64) -> GenOptions {
    GenOptions {
        types: 1,
        goods: 2,
        states: 1,
        atoms: 1,
        seed,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The Pareto optimal allocation supported by `price`, if the clearing
/// wealth split is interior.
pub fn supported_allocation(economy: &Economy, price: &[f64]) -> Option<Allocation> {
    let types = economy.types();
    let supply = aggregate_endowment(economy, 0);
    let wealth = dot(price, &supply);
    // Demand per unit of wealth is linear in wealth for both families.
    let unit: Vec<Vec<f64>> = types
        .iter()
        .map(|t| t.utility[0].demand(price, 1.0).ok())
        .collect::<Option<_>>()?;
    let gap = unit[0][0] - unit[1][0];
    if gap.abs() < 1e-12 {
        return None;
    }
    let w0 = (supply[0] - wealth * unit[1][0]) / gap;
    if !(w0 > 0.0 && w0 < wealth) {
        return None;
    }
    let spend = [w0, wealth - w0];
    let bundles = (0..2)
        .map(|i| vec![unit[i].iter().map(|c| c * spend[i] / types[i].mass).collect()])
        .collect();
    Allocation::feasible(economy, bundles).ok()
}

pub struct StrictWitness {
    pub seed: u64,
    pub economy: Economy,
    pub allocation: Allocation,
    pub prices: PriceSystem,
    pub certificate: Value,
}

/// The first seed with a witness, and on it the witness whose supporting
/// price lies farthest from the Walrasian price.
pub fn search(seed: u64, seeds: u64, grid: usize) -> Result<Option<StrictWitness>, CliError> {
    for k in 0..seeds {
        let s = seed.wrapping_add(k);
        let e = generate_economy(&strict_options(s))?;
        let walras = walras_selection(&e, &WalrasOptions::default())?;
        let mut best: Option<(f64, StrictWitness)> = None;
        for j in 1..grid {
            let p1 = j as f64 / grid as f64;
            let price = vec![p1, 1.0 - p1];
            let Some(f) = supported_allocation(&e, &price) else {
                continue;
            };
            // Skip the equilibrium itself: its budgets bind at endowment value.
            let t = &e.types()[0];
            if (dot(&price, f.bundle(0, 0)) - dot(&price, &t.endowment[0])).abs() < 1e-6 {
                continue;
            }
            let prices = PriceSystem::new(vec![price.clone()])?;
            let bayes = verify_bayes_ree(&e, &f, &prices, &ReeOptions::default())?;
            if bayes.pass {
                continue;
            }
            let options = ExpostOptions {
                oracle_step: Some(ORACLE_STEP),
                ..ExpostOptions::default()
            };
            let expost = expost_core_check(&e, &f, &options)?;
            let oracle_clear = expost.states.iter().all(|o| o.oracle_blocked == Some(false));
            if expost.verdict != ExpostVerdict::InCore || !oracle_clear {
                continue;
            }
            let certificate = json!({
                "kind": "strict-inclusion",
                "seed": s,
                "supporting_price": nums(&price),
                "walras_price": nums(walras.prices.row(0)),
                "oracle_step": num(ORACLE_STEP),
                "expost": expost_report_value(&e, &expost),
                "bayes": ree_report_value(&e, &bayes),
            });
            let distance = (p1 - walras.prices.row(0)[0]).abs();
            if best.as_ref().map_or(true, |(d, _)| distance > *d) {
                let witness = StrictWitness {
                    seed: s,
                    economy: e.clone(),
                    allocation: f,
                    prices,
                    certificate,
                };
                best = Some((distance, witness));
            }
        }
        if let Some((_, w)) = best {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

pub fn demo(seed: u64, seeds: u64, grid: usize, out: Option<&Path>) -> Result<Outcome, CliError> {
    if grid < 2 {
        return Err(CliError::input("--grid must be at least 2"));
    }
    let Some(w) = search(seed, seeds, grid)? else {
        return Ok(Outcome::with(
            EXIT_UNDECIDED,
            json!({ "found": false, "seeds": seeds, "grid": grid }),
        ));
    };
    if let Some(dir) = out {
        write_json(&dir.join("economy.json"), &economy_value(&w.economy))?;
        write_json(&dir.join("allocation.json"), &allocation_value(&w.economy, &w.allocation))?;
        write_json(&dir.join("prices.json"), &prices_value(&w.economy, &w.prices))?;
        write_json(&dir.join("certificate.json"), &w.certificate)?;
    }
    Ok(Outcome::ok(json!({
        "found": true,
        "seed": w.seed,
        "allocation": allocation_value(&w.economy, &w.allocation)["bundles"],
        "certificate": w.certificate,
        "written": out,
    })))
}
