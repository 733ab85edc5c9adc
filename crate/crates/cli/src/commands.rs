//! Command implementations. Each returns the report and exit code; the
//! caller prints.

use std::path::Path;

use ecl_core::blocking::{
    expost_core_check, BlockOptions, BlockSearch, ExpostOptions, ExpostReport, ExpostVerdict, Unblocked,
};
use ecl_core::example::{example_economy, EXAMPLE_BUNDLES, EXAMPLE_PRICE};
use ecl_core::fine::{
    expost_to_fine_block, find_fine_block, verify_fine_core_candidate, CommMode, FineOptions, FineSearch, FineVerdict,
};
use ecl_core::generate::{generate_economy, random_allocation, GenOptions};
use ecl_core::ree::{construct_ree, verify_bayes_ree, verify_maximin_ree, Clause, Definition, ReeOptions, ReeReport};
use ecl_core::walras::{walras_selection, WalrasOptions};
use ecl_core::{split_atoms, validate_economy, Economy};
use serde_json::{json, Map, Value};

use crate::files::*;
use crate::json::{num, nums};
use crate::{CliError, CommFlag, Command, ModeFlag, Outcome, EXIT_FAILED, EXIT_UNDECIDED};

pub fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Validate { economy } => validate(economy),
        Command::Solve { economy, out, tol } => solve(economy, out.as_deref(), *tol),
        Command::CheckExpost {
            economy,
            allocation,
            tol,
            budget,
            oracle_step,
            certificate,
        } => check_expost(economy, allocation, *tol, *budget, *oracle_step, certificate.as_deref()),
        Command::CheckRee {
            economy,
            allocation,
            prices,
            mode,
            tol,
        } => check_ree(economy, allocation, prices, *mode, *tol),
        Command::CheckFine {
            economy,
            allocation,
            comm,
            budget,
            tol,
            certificate,
        } => check_fine(economy, allocation, *comm, *budget, *tol, certificate.as_deref()),
        Command::DemoExample3 { states, out } => demo_example3(*states, out.as_deref()),
        Command::Gen {
            types,
            goods,
            states,
            atoms,
            seed,
            out,
        } => {
            let options = GenOptions {
                types: *types,
                goods: *goods,
                states: *states,
                atoms: *atoms,
                seed: *seed,
            };
            let economy = generate_economy(&options)?;
            emit(out.as_deref(), economy_value(&economy), json!({ "written": out }))
        }
        Command::SplitAtoms { economy, out } => {
            let e = read_economy(economy)?;
            let split = split_atoms(&e);
            emit(
                out.as_deref(),
                economy_value(&split),
                json!({ "written": out, "atoms_split": e.atoms().len() }),
            )
        }
        Command::DemoStrict { seed, seeds, grid, out } => crate::strict::demo(*seed, *seeds, *grid, out.as_deref()),
        Command::ExperimentAtoms {
            atoms,
            heterogeneous,
            count,
            seed,
            budget,
        } => experiment_atoms(*atoms, *heterogeneous, *count, *seed, *budget),
    }
}

fn validate(path: &Path) -> Result<Outcome, CliError> {
    let e = read_economy(path)?;
    let a = e.assumptions();
    Ok(Outcome::ok(json!({
        "valid": true,
        "types": e.n_types(),
        "goods": e.goods(),
        "states": e.n_states(),
        "assumptions": {
            "A1": a.a1,
            "A1'": a.a1_prime,
            "A2": a.a2,
            "A3": a.a3,
            "A4": a.a4,
            "A4'": a.a4_prime,
            "A5": a.a5,
            "A6": a.a6,
        },
        "notes": a.notes,
    })))
}

fn solve(path: &Path, out: Option<&Path>, tol: f64) -> Result<Outcome, CliError> {
    if !(tol > 0.0) {
        return Err(CliError::input("--tol must be positive"));
    }
    let e = read_economy(path)?;
    let options = WalrasOptions {
        tol,
        ..WalrasOptions::default()
    };
    let sel = walras_selection(&e, &options)?;
    let states: Vec<Value> = sel
        .results
        .iter()
        .enumerate()
        .map(|(s, r)| {
            json!({
                "state": e.states().label(s),
                "price": nums(&r.price),
                "residual": num(r.residual),
                "iterations": r.iterations,
            })
        })
        .collect();
    let allocation = allocation_value(&e, &sel.allocation);
    let prices = prices_value(&e, &sel.prices);
    match out {
        Some(dir) => {
            write_json(&dir.join("allocation.json"), &allocation)?;
            write_json(&dir.join("prices.json"), &prices)?;
            Ok(Outcome::ok(json!({ "states": states, "written": dir })))
        }
        None => Ok(Outcome::ok(json!({
            "states": states,
            "allocation": allocation["bundles"],
            "prices": prices["prices"],
        }))),
    }
}

fn verdict_name(v: ExpostVerdict) -> &'static str {
    match v {
        ExpostVerdict::InCore => "in-core",
        ExpostVerdict::Blocked => "blocked",
        ExpostVerdict::Undecided => "undecided",
    }
}

pub fn expost_report_value(e: &Economy, r: &ExpostReport) -> Value {
    let states: Vec<Value> = r
        .states
        .iter()
        .map(|o| {
            let mut m = Map::new();
            m.insert("state".into(), json!(o.state));
            match &o.search {
                BlockSearch::Blocked(c) => {
                    m.insert("result".into(), json!("blocked"));
                    m.insert("margin".into(), num(c.margin));
                }
                BlockSearch::Unblocked(Unblocked::Supported { price }) => {
                    m.insert("result".into(), json!("supported"));
                    m.insert("price".into(), nums(price));
                }
                BlockSearch::Unblocked(Unblocked::DualBound { worst }) => {
                    m.insert("result".into(), json!("dual-bound"));
                    m.insert("worst".into(), num(*worst));
                }
                BlockSearch::Undecided(reason) => {
                    m.insert("result".into(), json!("undecided"));
                    m.insert("reason".into(), json!(reason));
                }
            }
            if let Some(b) = o.oracle_blocked {
                m.insert("oracle_blocked".into(), json!(b));
            }
            Value::Object(m)
        })
        .collect();
    json!({
        "verdict": verdict_name(r.verdict),
        "states": states,
        "certificate": r.certificate.as_ref().map(|c| expost_certificate_value(e, c)),
        "notes": r.notes,
    })
}

fn check_expost(
    economy: &Path,
    allocation: &Path,
    tol: f64,
    budget: usize,
    oracle_step: Option<f64>,
    certificate: Option<&Path>,
) -> Result<Outcome, CliError> {
    let e = read_economy(economy)?;
    let f = read_allocation(allocation, &e)?;
    if let Some(path) = certificate {
        let c = read_expost_certificate(path, &e)?;
        let s = e.states().index_of(&c.state).expect("checked on load");
        let se = e.state_economy(s);
        let bundles = f.state_bundles(s);
        return match c.verify(&se, &bundles, tol) {
            Ok(()) => Ok(Outcome::with(
                EXIT_FAILED,
                json!({
                    "certificate": "valid",
                    "verdict": "blocked",
                    "state": c.state,
                    "margin": num(c.recomputed_margin(&se, &bundles)),
                }),
            )),
            Err(err) => Err(CliError::input(err.to_string())),
        };
    }
    let options = ExpostOptions {
        block: BlockOptions {
            eps_block: tol,
            budget,
            ..BlockOptions::default()
        },
        oracle_step,
    };
    let r = expost_core_check(&e, &f, &options)?;
    let code = match r.verdict {
        ExpostVerdict::InCore => 0,
        ExpostVerdict::Blocked => EXIT_FAILED,
        ExpostVerdict::Undecided => EXIT_UNDECIDED,
    };
    Ok(Outcome::with(code, expost_report_value(&e, &r)))
}

fn clause_name(c: Clause) -> &'static str {
    match c {
        Clause::Measurability => "measurability",
        Clause::Budget => "budget",
        Clause::Optimality => "optimality",
    }
}

pub fn ree_report_value(e: &Economy, r: &ReeReport) -> Value {
    let labels = |cell: &[usize]| -> Vec<String> { cell.iter().map(|&s| e.states().label(s).to_string()).collect() };
    let failures: Vec<Value> = r
        .failures()
        .map(|v| {
            json!({
                "type": e.types()[v.type_index].name,
                "clause": clause_name(v.clause),
                "state": e.states().label(v.state),
                "actual": num(v.actual),
                "benchmark": num(v.benchmark),
                "cell": labels(&v.cell),
            })
        })
        .collect();
    let mut interim = Map::new();
    for (t, p) in r.interim.iter().enumerate() {
        interim.insert(e.types()[t].name.clone(), json!(e.states().partition_labels(p)));
    }
    json!({
        "definition": match r.definition {
            Definition::Bayes => "bayes",
            Definition::Maximin => "maximin",
        },
        "pass": r.pass,
        "checked": r.verdicts.len(),
        "failures": failures,
        "interim": interim,
        "merged_by_tolerance": r.merged_by_tolerance,
    })
}

fn check_ree(economy: &Path, allocation: &Path, prices: &Path, mode: ModeFlag, tol: f64) -> Result<Outcome, CliError> {
    if !(tol > 0.0) {
        return Err(CliError::input("--tol must be positive"));
    }
    let e = read_economy(economy)?;
    let f = read_allocation(allocation, &e)?;
    let p = read_prices(prices, &e)?;
    let options = ReeOptions {
        tol,
        ..ReeOptions::default()
    };
    let mut reports = Vec::new();
    if matches!(mode, ModeFlag::Bayes | ModeFlag::Both) {
        reports.push(verify_bayes_ree(&e, &f, &p, &options)?);
    }
    if matches!(mode, ModeFlag::Maximin | ModeFlag::Both) {
        reports.push(verify_maximin_ree(&e, &f, &p, &options)?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let value = json!({
        "pass": pass,
        "reports": reports.iter().map(|r| ree_report_value(&e, r)).collect::<Vec<_>>(),
    });
    Ok(Outcome::with(if pass { 0 } else { EXIT_FAILED }, value))
}

fn modes(comm: CommFlag) -> Vec<CommMode> {
    match comm {
        CommFlag::Full => vec![CommMode::Full],
        CommFlag::Private => vec![CommMode::Private],
        CommFlag::Both => vec![CommMode::Full, CommMode::Private],
    }
}

fn check_fine(
    economy: &Path,
    allocation: &Path,
    comm: CommFlag,
    budget: usize,
    tol: f64,
    certificate: Option<&Path>,
) -> Result<Outcome, CliError> {
    let e = read_economy(economy)?;
    let f = read_allocation(allocation, &e)?;
    if let Some(path) = certificate {
        let c = read_fine_certificate(path, &e)?;
        return match c.verify(&e, &f, tol) {
            Ok(()) => Ok(Outcome::with(
                EXIT_FAILED,
                json!({
                    "certificate": "valid",
                    "verdict": "blocked",
                    "margin": num(c.recomputed_margin(&e, &f)),
                }),
            )),
            Err(err) => Err(CliError::input(err.to_string())),
        };
    }
    let options = FineOptions {
        modes: modes(comm),
        eps_block: tol,
        budget,
        ..FineOptions::default()
    };
    let r = verify_fine_core_candidate(&e, &f, &options)?;
    let (verdict, code, cert, reason) = match &r.verdict {
        FineVerdict::NoFineBlockFound => ("no-fine-block-found", 0, None, None),
        FineVerdict::Blocked(c) => ("blocked", EXIT_FAILED, Some(fine_certificate_value(&e, c)), None),
        FineVerdict::Undecided(why) => ("undecided", EXIT_UNDECIDED, None, Some(why.clone())),
    };
    Ok(Outcome::with(
        code,
        json!({
            "verdict": verdict,
            "modes": r.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "budget": r.budget,
            "examined": r.examined,
            "disclosure": r.disclosure,
            "certificate": cert,
            "reason": reason,
        }),
    ))
}

/// Solves the example economy and compares prices and bundles with the
/// reference numbers in every state.
fn demo_example3(states: usize, out: Option<&Path>) -> Result<Outcome, CliError> {
    if states == 0 {
        return Err(CliError::input("--states must be at least 1"));
    }
    let e = example_economy(states);
    let ree = construct_ree(&e, &WalrasOptions::default(), &ReeOptions::default())?;
    let expost = expost_core_check(&e, &ree.allocation, &ExpostOptions::default())?;
    let mut deviation: f64 = 0.0;
    let mut computed = Vec::new();
    for s in 0..e.n_states() {
        let p = ree.prices.row(s);
        for k in 0..2 {
            deviation = deviation.max((p[k] - EXAMPLE_PRICE[k]).abs());
            for t in 0..2 {
                deviation = deviation.max((ree.allocation.bundle(t, s)[k] - EXAMPLE_BUNDLES[t][k]).abs());
            }
        }
        computed.push(json!({
            "state": e.states().label(s),
            "price": nums(p),
            "A": nums(ree.allocation.bundle(0, s)),
            "B": nums(ree.allocation.bundle(1, s)),
        }));
    }
    if let Some(dir) = out {
        write_json(&dir.join("economy.json"), &economy_value(&e))?;
        write_json(&dir.join("allocation.json"), &allocation_value(&e, &ree.allocation))?;
        write_json(&dir.join("prices.json"), &prices_value(&e, &ree.prices))?;
    }
    let in_core = expost.verdict == ExpostVerdict::InCore;
    let matched = deviation <= 1e-8 && ree.bayes.pass && ree.maximin.pass && in_core;
    Ok(Outcome::with(
        if matched { 0 } else { EXIT_FAILED },
        json!({
            "states": states,
            "reference": {
                "price": nums(&EXAMPLE_PRICE),
                "A": nums(&EXAMPLE_BUNDLES[0]),
                "B": nums(&EXAMPLE_BUNDLES[1]),
            },
            "computed": computed,
            "max_deviation": num(deviation),
            "ree_bayes": ree.bayes.pass,
            "ree_maximin": ree.maximin.pass,
            "expost": verdict_name(expost.verdict),
            "match": matched,
        }),
    ))
}

fn experiment_atoms(atoms: usize, heterogeneous: bool, count: u64, seed: u64, budget: usize) -> Result<Outcome, CliError> {
    if atoms == 0 {
        return Err(CliError::input("--atoms must be at least 1"));
    }
    let mut tally: std::collections::BTreeMap<&str, u64> = Default::default();
    for k in 0..count {
        let options = GenOptions {
            types: 2,
            goods: 2,
            states: 2,
            atoms,
            seed: seed.wrapping_add(k),
        };
        let mut e = generate_economy(&options)?;
        if heterogeneous {
            let mut desc = e.to_desc();
            for (j, t) in desc.types.iter_mut().filter(|t| t.kind == ecl_core::Kind::Atom).enumerate() {
                let factor = 1.0 + 0.25 * j as f64;
                t.endowment.iter_mut().flatten().for_each(|v| *v *= factor);
            }
            e = validate_economy(&desc)?;
        }
        let f = random_allocation(&e, seed.wrapping_add(k));
        let expost = expost_core_check(&e, &f, &ExpostOptions::default())?;
        *tally.entry(verdict_name(expost.verdict)).or_default() += 1;
        if expost.verdict != ExpostVerdict::Blocked {
            continue;
        }
        let fine = FineOptions {
            budget,
            ..FineOptions::default()
        };
        let cert = expost.certificate.as_ref().expect("blocked reports carry a certificate");
        match expost_to_fine_block(&e, &f, cert, &fine) {
            Ok(_) => *tally.entry("fine-from-expost").or_default() += 1,
            Err(_) => match find_fine_block(&e, &f, &fine)? {
                FineSearch::Found(_) => *tally.entry("fine-by-search").or_default() += 1,
                FineSearch::NoneFound { .. } => *tally.entry("fine-none-found").or_default() += 1,
                FineSearch::Undecided { .. } => *tally.entry("fine-undecided").or_default() += 1,
            },
        }
    }
    Ok(Outcome::ok(json!({
        "atoms": atoms,
        "heterogeneous": heterogeneous,
        "economies": count,
        "counts": tally,
        "note": "counts only; no inclusion is asserted for these economies",
    })))
}
