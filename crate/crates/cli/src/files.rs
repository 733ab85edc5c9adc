//! Economy, allocation, price and certificate files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ecl_core::blocking::BlockCertificate;
use ecl_core::fine::{CommMode, FineBlockCertificate};
use ecl_core::{validate_economy, Allocation, Economy, EconomyDesc, FuzzyCoalition, Partition, PriceSystem};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::json::{num, nums, to_string};
use crate::{CliError, Outcome};

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, to_string(value)).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn read_economy(path: &Path) -> Result<Economy, CliError> {
    let desc: EconomyDesc = parse(path)?;
    validate_economy(&desc).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn economy_value(economy: &Economy) -> Value {
    serde_json::to_value(economy.to_desc()).expect("descriptions serialize")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationFile {
    /// Type name, then state label.
    bundles: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PricesFile {
    prices: BTreeMap<String, Vec<f64>>,
}

/// Looks up `labels` in a keyed map, rejecting missing and extra keys.
fn keyed<'a, V>(map: &'a BTreeMap<String, V>, labels: &[String], what: &str) -> Result<Vec<&'a V>, CliError> {
    if let Some(extra) = map.keys().find(|k| !labels.contains(k)) {
        return Err(CliError::input(format!("unknown {what} {extra:?}")));
    }
    labels
        .iter()
        .map(|l| map.get(l).ok_or_else(|| CliError::input(format!("missing {what} {l:?}"))))
        .collect()
}

fn type_names(economy: &Economy) -> Vec<String> {
    economy.types().iter().map(|t| t.name.clone()).collect()
}

/// Reads an allocation and checks its dimensions and feasibility.
pub fn read_allocation(path: &Path, economy: &Economy) -> Result<Allocation, CliError> {
    let file: AllocationFile = parse(path)?;
    let labels = economy.states().labels().to_vec();
    let mut bundles = Vec::new();
    for per_state in keyed(&file.bundles, &type_names(economy), "type")? {
        let rows: Vec<Vec<f64>> = keyed(per_state, &labels, "state")?.into_iter().cloned().collect();
        bundles.push(rows);
    }
    Allocation::feasible(economy, bundles).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn allocation_value(economy: &Economy, allocation: &Allocation) -> Value {
    let mut types = Map::new();
    for (t, ty) in economy.types().iter().enumerate() {
        let mut states = Map::new();
        for (s, label) in economy.states().labels().iter().enumerate() {
            states.insert(label.clone(), nums(allocation.bundle(t, s)));
        }
        types.insert(ty.name.clone(), Value::Object(states));
    }
    json!({ "bundles": types })
}

pub fn read_prices(path: &Path, economy: &Economy) -> Result<PriceSystem, CliError> {
    let file: PricesFile = parse(path)?;
    let rows: Vec<Vec<f64>> = keyed(&file.prices, economy.states().labels(), "state")?
        .into_iter()
        .cloned()
        .collect();
    if rows.iter().any(|r| r.len() != economy.goods()) {
        return Err(CliError::input(format!("{}: price rows need {} goods", path.display(), economy.goods())));
    }
    PriceSystem::new(rows).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn prices_value(economy: &Economy, prices: &PriceSystem) -> Value {
    let mut rows = Map::new();
    for (s, label) in economy.states().labels().iter().enumerate() {
        rows.insert(label.clone(), nums(prices.row(s)));
    }
    json!({ "prices": rows })
}

fn coalition_value(economy: &Economy, coalition: &FuzzyCoalition) -> Value {
    let mut m = Map::new();
    for (t, ty) in economy.types().iter().enumerate() {
        m.insert(ty.name.clone(), num(coalition.participation[t]));
    }
    Value::Object(m)
}

fn partition_value(economy: &Economy, p: &Partition) -> Value {
    json!(economy.states().partition_labels(p))
}

pub fn expost_certificate_value(economy: &Economy, c: &BlockCertificate) -> Value {
    let mut bundles = Map::new();
    for (t, ty) in economy.types().iter().enumerate() {
        bundles.insert(ty.name.clone(), nums(&c.bundles[t]));
    }
    json!({
        "kind": "expost",
        "state": c.state,
        "coalition": coalition_value(economy, &c.coalition),
        "bundles": bundles,
        "margin": num(c.margin),
    })
}

pub fn fine_certificate_value(economy: &Economy, c: &FineBlockCertificate) -> Value {
    let mut communication = Map::new();
    for (t, ty) in economy.types().iter().enumerate() {
        communication.insert(ty.name.clone(), partition_value(economy, &c.communication[t]));
    }
    let event: Vec<&str> = c.event.iter().map(|&s| economy.states().label(s)).collect();
    let assignment = allocation_value(economy, &c.assignment)["bundles"].clone();
    json!({
        "kind": "fine",
        "mode": c.mode.name(),
        "coalition": coalition_value(economy, &c.coalition),
        "communication": communication,
        "event": event,
        "assignment": assignment,
        "margin": num(c.margin),
    })
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum CertificateFile {
    Expost {
        state: String,
        coalition: BTreeMap<String, f64>,
        bundles: BTreeMap<String, Vec<f64>>,
        margin: f64,
    },
    Fine {
        mode: String,
        coalition: BTreeMap<String, f64>,
        communication: BTreeMap<String, Vec<Vec<String>>>,
        event: Vec<String>,
        assignment: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
        margin: f64,
    },
}

fn coalition_from(economy: &Economy, map: &BTreeMap<String, f64>) -> Result<FuzzyCoalition, CliError> {
    let weights: Vec<f64> = keyed(map, &type_names(economy), "type")?.into_iter().copied().collect();
    FuzzyCoalition::for_economy(weights, economy).map_err(|e| CliError::input(e.to_string()))
}

pub fn read_expost_certificate(path: &Path, economy: &Economy) -> Result<BlockCertificate, CliError> {
    match parse(path)? {
        CertificateFile::Expost {
            state,
            coalition,
            bundles,
            margin,
        } => {
            if economy.states().index_of(&state).is_none() {
                return Err(CliError::input(format!("unknown state {state:?}")));
            }
            let bundles: Vec<Vec<f64>> = keyed(&bundles, &type_names(economy), "type")?.into_iter().cloned().collect();
            if bundles.iter().any(|b| b.len() != economy.goods()) {
                return Err(CliError::input(format!("bundles need {} goods", economy.goods())));
            }
            Ok(BlockCertificate {
                state,
                coalition: coalition_from(economy, &coalition)?,
                bundles,
                margin,
            })
        }
        CertificateFile::Fine { .. } => Err(CliError::input(format!(
            "{}: a fine certificate; use check-fine",
            path.display()
        ))),
    }
}

pub fn read_fine_certificate(path: &Path, economy: &Economy) -> Result<FineBlockCertificate, CliError> {
    match parse(path)? {
        CertificateFile::Fine {
            mode,
            coalition,
            communication,
            event,
            assignment,
            margin,
        } => {
            let mode = match mode.as_str() {
                "full" => CommMode::Full,
                "private" => CommMode::Private,
                other => return Err(CliError::input(format!("unknown communication mode {other:?}"))),
            };
            let communication = keyed(&communication, &type_names(economy), "type")?
                .into_iter()
                .map(|cells| economy.states().partition_from_labels(cells))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::input(e.to_string()))?;
            let event = event
                .iter()
                .map(|l| {
                    economy
                        .states()
                        .index_of(l)
                        .ok_or_else(|| CliError::input(format!("unknown state {l:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let labels = economy.states().labels().to_vec();
            let mut bundles = Vec::new();
            for per_state in keyed(&assignment, &type_names(economy), "type")? {
                bundles.push(keyed(per_state, &labels, "state")?.into_iter().cloned().collect());
            }
            Ok(FineBlockCertificate {
                coalition: coalition_from(economy, &coalition)?,
                mode,
                communication,
                event,
                assignment: Allocation::new(bundles),
                margin,
            })
        }
        CertificateFile::Expost { .. } => Err(CliError::input(format!(
            "{}: an ex-post certificate; use check-expost",
            path.display()
        ))),
    }
}

/// Writes `value` to `path` when given, else returns it for stdout.
pub fn emit(path: Option<&Path>, value: Value, report: Value) -> Result<Outcome, CliError> {
    match path {
        Some(p) => {
            write_json(p, &value)?;
            Ok(Outcome::ok(report))
        }
        None => Ok(Outcome::ok(value)),
    }
}
