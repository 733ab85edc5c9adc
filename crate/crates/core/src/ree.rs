//! Rational expectations equilibria: Bayesian and maximin verification and
//! construction from the state-wise Walrasian selection.
//!
//! Each type's interim information is `G_t = F_t ∨ σ(π)`. Prices are
//! constant on `G_t` cells, so the budget constraints of a cell-constant
//! plan collapse to one constraint at the cell price with the smallest
//! endowment value over the cell.

use crate::error::Result;
use crate::model::{Allocation, Economy, PriceSystem};
use crate::partitions::{combine_info, cond_expect, is_measurable, merged_by_tolerance, sigma_of_price, Partition};
use crate::simplex::mirror_ascent;
use crate::utility::UtilitySpec;
use crate::walras::{walras_selection, WalrasOptions};

/// Tolerance on utility comparisons.
pub const REE_TOL: f64 = 1e-8;

/// Slack on budget constraints, in value units.
pub const BUDGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReeOptions {
    pub tol: f64,
    /// Tolerance for grouping states by price.
    pub price_tol: f64,
}

impl Default for ReeOptions {
    fn default() -> Self {
        ReeOptions {
            tol: REE_TOL,
            price_tol: crate::partitions::PRICE_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Definition {
    Bayes,
    Maximin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    Measurability,
    Budget,
    Optimality,
}

/// One clause evaluated for one type at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseVerdict {
    pub type_index: usize,
    pub clause: Clause,
    pub state: usize,
    pub pass: bool,
    /// Value attained by the allocation (utility or expenditure).
    pub actual: f64,
    /// What the clause compares it with.
    pub benchmark: f64,
    /// The states of the cell examined.
    pub cell: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReeReport {
    pub definition: Definition,
    pub pass: bool,
    pub verdicts: Vec<ClauseVerdict>,
    /// Interim partition of each type.
    pub interim: Vec<Partition>,
    /// Some states were grouped by price only through the tolerance.
    pub merged_by_tolerance: bool,
}

impl ReeReport {
    pub fn failures(&self) -> impl Iterator<Item = &ClauseVerdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }

    fn finish(definition: Definition, verdicts: Vec<ClauseVerdict>, interim: Vec<Partition>, merged: bool) -> Self {
        ReeReport {
            definition,
            pass: verdicts.iter().all(|v| v.pass),
            verdicts,
            interim,
            merged_by_tolerance: merged,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨p, x⟩ ≤ ⟨p, e_t(ω)⟩` up to [`BUDGET_SLACK`].
pub fn budget_ok(economy: &Economy, t: usize, state: usize, price: &[f64], bundle: &[f64]) -> bool {
    dot(price, bundle) <= dot(price, &economy.types()[t].endowment[state]) + BUDGET_SLACK
}

/// Worst utility of the plan over the interim cell containing `state`.
pub fn maximin_utility(economy: &Economy, t: usize, state: usize, plan: &[Vec<f64>], combined: &Partition) -> f64 {
    let ty = &economy.types()[t];
    combined
        .cell(state)
        .iter()
        .map(|&s| ty.utility[s].value(&plan[s]))
        .fold(f64::INFINITY, f64::min)
}

fn interim_partitions(economy: &Economy, prices: &PriceSystem, price_tol: f64) -> Result<(Vec<Partition>, bool)> {
    let sigma = sigma_of_price(prices, price_tol);
    let merged = merged_by_tolerance(prices, &sigma);
    let parts = economy
        .types()
        .iter()
        .map(|t| combine_info(&t.partition, &sigma))
        .collect::<Result<_>>()?;
    Ok((parts, merged))
}

fn budget_verdicts(economy: &Economy, allocation: &Allocation, prices: &PriceSystem) -> Vec<ClauseVerdict> {
    let mut out = Vec::new();
    for t in 0..economy.n_types() {
        for s in 0..economy.n_states() {
            let p = prices.row(s);
            let x = allocation.bundle(t, s);
            out.push(ClauseVerdict {
                type_index: t,
                clause: Clause::Budget,
                state: s,
                pass: budget_ok(economy, t, s, p, x),
                actual: dot(p, x),
                benchmark: dot(p, &economy.types()[t].endowment[s]),
                cell: vec![s],
            });
        }
    }
    out
}

fn close(actual: f64, benchmark: f64, tol: f64) -> bool {
    (actual - benchmark).abs() <= tol * benchmark.abs().max(1.0)
}

fn check_shapes(economy: &Economy, allocation: &Allocation, prices: &PriceSystem) -> Result<()> {
    allocation.check_dims(economy)?;
    if prices.len() != economy.n_states() || prices.rows().iter().any(|r| r.len() != economy.goods()) {
        return Err(crate::Error::Dimension(format!(
            "price system must be {} states × {} goods",
            economy.n_states(),
            economy.goods()
        )));
    }
    Ok(())
}

/// Budget feasibility in every state, and the worst utility over each
/// interim cell equal to the worst indirect utility over that cell.
pub fn verify_maximin_ree(
    economy: &Economy,
    allocation: &Allocation,
    prices: &PriceSystem,
    options: &ReeOptions,
) -> Result<ReeReport> {
    check_shapes(economy, allocation, prices)?;
    let (interim, merged) = interim_partitions(economy, prices, options.price_tol)?;
    let mut verdicts = budget_verdicts(economy, allocation, prices);
    for (t, ty) in economy.types().iter().enumerate() {
        let indirect: Vec<f64> = (0..economy.n_states())
            .map(|s| {
                let p = prices.row(s);
                ty.utility[s].indirect(p, dot(p, &ty.endowment[s]))
            })
            .collect();
        for s in 0..economy.n_states() {
            let cell = interim[t].cell(s).to_vec();
            let actual = maximin_utility(economy, t, s, &allocation.bundles[t], &interim[t]);
            let benchmark = cell.iter().map(|&w| indirect[w]).fold(f64::INFINITY, f64::min);
            verdicts.push(ClauseVerdict {
                type_index: t,
                clause: Clause::Optimality,
                state: s,
                pass: close(actual, benchmark, options.tol),
                actual,
                benchmark,
                cell,
            });
        }
    }
    Ok(ReeReport::finish(Definition::Maximin, verdicts, interim, merged))
}

/// Best conditional expected utility of one bundle spent within a single
/// budget, with an upper bound from concavity. Returns (value, upper bound).
fn cell_optimum(utilities: &[UtilitySpec], weights: &[f64], price: &[f64], wealth: f64) -> (f64, f64) {
    if !(wealth > 0.0) {
        let v: f64 = utilities.iter().zip(weights).map(|(u, w)| w * u.value(&vec![0.0; price.len()])).sum();
        return (v, v);
    }
    if utilities.iter().all(|u| *u == utilities[0]) {
        let v = utilities[0].indirect(price, wealth);
        return (v, v);
    }
    let l = price.len();
    let bundle = |s: &[f64]| -> Vec<f64> { s.iter().zip(price).map(|(a, p)| wealth * a / p).collect() };
    let value = |s: &[f64]| -> f64 {
        let x = bundle(s);
        utilities.iter().zip(weights).map(|(u, w)| w * u.value(&x)).sum()
    };
    let grad = |s: &[f64]| -> Vec<f64> {
        let x = bundle(s);
        let mut g = vec![0.0; l];
        for (u, w) in utilities.iter().zip(weights) {
            if let Some(d) = u.gradient(&x) {
                for k in 0..l {
                    g[k] += w * d[k] * wealth / price[k];
                }
            }
        }
        g
    };
    // Start from the demand of the first state's utility.
    let x0 = utilities[0].demand_unchecked(price, wealth);
    let s0: Vec<f64> = x0.iter().zip(price).map(|(x, p)| x * p / wealth).collect();
    let (s, g) = mirror_ascent(s0, grad, |_, _| false, 1e-15, 5000);
    let v = value(&s);
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean: f64 = s.iter().zip(&g).map(|(a, b)| a * b).sum();
    (v, v + (top - mean).max(0.0))
}

/// Measurability with respect to interim information, budget feasibility,
/// and conditional expected utility maximality on every interim cell.
pub fn verify_bayes_ree(
    economy: &Economy,
    allocation: &Allocation,
    prices: &PriceSystem,
    options: &ReeOptions,
) -> Result<ReeReport> {
    check_shapes(economy, allocation, prices)?;
    let (interim, merged) = interim_partitions(economy, prices, options.price_tol)?;
    let mut verdicts = Vec::new();
    for t in 0..economy.n_types() {
        let plan = &allocation.bundles[t];
        let part = &interim[t];
        let measurable = is_measurable(plan, part);
        for s in 0..economy.n_states() {
            let cell = part.cell(s).to_vec();
            let spread = cell
                .iter()
                .map(|&w| plan[w].iter().zip(&plan[s]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            verdicts.push(ClauseVerdict {
                type_index: t,
                clause: Clause::Measurability,
                state: s,
                pass: measurable && spread <= crate::partitions::MEASURABILITY_TOL,
                actual: spread,
                benchmark: 0.0,
                cell,
            });
        }
    }
    verdicts.extend(budget_verdicts(economy, allocation, prices));
    for (t, ty) in economy.types().iter().enumerate() {
        let plan = &allocation.bundles[t];
        let part = &interim[t];
        let utils: Vec<f64> = (0..economy.n_states()).map(|s| ty.utility[s].value(&plan[s])).collect();
        let expected = cond_expect(&utils, part, &ty.prior);
        for cell in part.cells() {
            let mass: f64 = cell.iter().map(|&s| ty.prior[s]).sum();
            let weights: Vec<f64> = cell.iter().map(|&s| ty.prior[s] / mass).collect();
            let utilities: Vec<UtilitySpec> = cell.iter().map(|&s| ty.utility[s].clone()).collect();
            let price = prices.row(cell[0]);
            let wealth = cell
                .iter()
                .map(|&s| dot(price, &ty.endowment[s]))
                .fold(f64::INFINITY, f64::min);
            let (_, upper) = cell_optimum(&utilities, &weights, price, wealth);
            let actual = expected[cell[0]];
            let pass = actual >= upper - options.tol * upper.abs().max(1.0);
            for &s in cell {
                verdicts.push(ClauseVerdict {
                    type_index: t,
                    clause: Clause::Optimality,
                    state: s,
                    pass,
                    actual,
                    benchmark: upper,
                    cell: cell.clone(),
                });
            }
        }
    }
    Ok(ReeReport::finish(Definition::Bayes, verdicts, interim, merged))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedRee {
    pub allocation: Allocation,
    pub prices: PriceSystem,
    pub bayes: ReeReport,
    pub maximin: ReeReport,
}

/// Walrasian selection state by state, verified under both definitions.
pub fn construct_ree(economy: &Economy, walras: &WalrasOptions, options: &ReeOptions) -> Result<ConstructedRee> {
    let sel = walras_selection(economy, walras)?;
    let bayes = verify_bayes_ree(economy, &sel.allocation, &sel.prices, options)?;
    let maximin = verify_maximin_ree(economy, &sel.allocation, &sel.prices, options)?;
    Ok(ConstructedRee {
        allocation: sel.allocation,
        prices: sel.prices,
        bayes,
        maximin,
    })
}
