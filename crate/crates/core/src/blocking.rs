//! Blocking coalitions and ex-post core membership.
//!
//! An allocation is in the ex-post core iff its restriction to every state is
//! in the fuzzy core of that state's complete-information economy. For a
//! single state, write `d_i(p) = p·e_i − E_i(p, ū_i)` for the value surplus
//! of type i at price p over the cost of its current utility. By minimax, a
//! block with atom set A exists iff
//!
//! ```text
//! W_∅ = min_p max_i d_i(p) > 0                      (A empty)
//! W_A = min_p Σ_{a∈A} m_a d_a(p) + Σ_{i atomless} m_i d_i(p)⁺ > 0
//! ```
//!
//! [`find_block`] first looks for a supporting price (all `d_i ≤ 0`), then
//! evaluates the `W` bounds on the simplex (two or three goods), and builds a
//! certificate with the improvement engine whenever a bound is positive.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::improve::{Group, Member, Program};
use crate::model::{Allocation, Economy, FuzzyCoalition, Kind};
use crate::simplex::minimize_on_simplex;
use crate::walras::StateEconomy;

/// Default minimum utility gain that counts as a strict improvement.
pub const EPS_BLOCK: f64 = 1e-6;

/// Relative tolerance for coalition feasibility in certificates.
pub const COALITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOptions {
    pub eps_block: f64,
    /// Rounds of the weight search per atom subset.
    pub budget: usize,
    /// Tolerance on value surpluses, relative to the value of the endowment.
    pub support_tol: f64,
    /// Most atoms whose subsets are enumerated.
    pub max_atoms: usize,
}

impl Default for BlockOptions {
    fn default() -> Self {
        BlockOptions {
            eps_block: EPS_BLOCK,
            budget: 60,
            support_tol: 1e-9,
            max_atoms: 10,
        }
    }
}

/// A coalition, its improving bundles and the smallest gain, in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCertificate {
    pub state: String,
    pub coalition: FuzzyCoalition,
    /// One bundle per type; only participants' bundles matter.
    pub bundles: Vec<Vec<f64>>,
    pub margin: f64,
}

impl BlockCertificate {
    /// Re-checks coalition validity, feasibility and strict improvement
    /// against the given state bundles.
    pub fn verify(&self, se: &StateEconomy, state_bundles: &[Vec<f64>], eps_block: f64) -> Result<()> {
        let stale = |m: String| Err(Error::StaleCertificate(m));
        let n = se.members.len();
        if self.bundles.len() != n || self.coalition.participation.len() != n {
            return stale(format!("certificate covers {} types, economy has {n}", self.bundles.len()));
        }
        if self.state != se.label {
            return stale(format!("certificate is for state {}, not {}", self.state, se.label));
        }
        let masses: Vec<f64> = se.members.iter().map(|m| m.mass).collect();
        let kinds: Vec<Kind> = se.members.iter().map(|m| m.kind).collect();
        FuzzyCoalition::new(self.coalition.participation.clone(), &masses, &kinds)
            .map_err(|e| Error::StaleCertificate(e.to_string()))?;
        let lambda = &self.coalition.participation;
        for k in 0..se.goods {
            let mut diff = 0.0;
            let mut scale: f64 = 1.0;
            for (i, m) in se.members.iter().enumerate() {
                if lambda[i] > 0.0 {
                    let g = self.bundles[i][k];
                    if !(g.is_finite() && g >= 0.0) {
                        return stale(format!("type {i} bundle is not a nonnegative vector"));
                    }
                    diff += lambda[i] * (g - m.endowment[k]);
                    scale = scale.max(lambda[i] * m.endowment[k]);
                }
            }
            if diff.abs() > COALITION_TOL * scale {
                return stale(format!("coalition does not clear good {k}: {diff:e}"));
            }
        }
        let gain = self.recomputed_margin(se, state_bundles);
        if !(gain >= eps_block) {
            return stale(format!("smallest gain {gain:e} is below {eps_block:e}"));
        }
        if gain < self.margin - 1e-12 * (1.0 + self.margin.abs()) {
            return stale(format!("stated margin {} exceeds actual gain {gain}", self.margin));
        }
        Ok(())
    }

    pub fn recomputed_margin(&self, se: &StateEconomy, state_bundles: &[Vec<f64>]) -> f64 {
        se.members
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.coalition.participation[i] > 0.0)
            .map(|(i, m)| m.utility.value(&self.bundles[i]) - m.utility.value(&state_bundles[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Why a state allocation was judged unblocked.
#[derive(Debug, Clone, PartialEq)]
pub enum Unblocked {
    /// Every type is at its demand at this price with endowment wealth.
    Supported { price: Vec<f64> },
    /// Every dual bound is nonpositive; `worst` is the largest.
    DualBound { worst: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockSearch {
    Blocked(BlockCertificate),
    Unblocked(Unblocked),
    Undecided(String),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_state_bundles(se: &StateEconomy, bundles: &[Vec<f64>]) -> Result<()> {
    if bundles.len() != se.members.len() || bundles.iter().any(|b| b.len() != se.goods) {
        return Err(Error::Dimension(format!(
            "state {}: expected {} bundles of {} goods",
            se.label,
            se.members.len(),
            se.goods
        )));
    }
    if bundles.iter().flatten().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::Infeasible(format!("state {}: negative or non-finite bundle", se.label)));
    }
    let supply = se.aggregate_endowment();
    for k in 0..se.goods {
        let used: f64 = se.members.iter().zip(bundles).map(|(m, x)| m.mass * x[k]).sum();
        if (used - supply[k]).abs() > crate::model::FEASIBILITY_TOL * supply[k].max(1.0) {
            return Err(Error::Infeasible(format!("state {}: good {k} does not clear", se.label)));
        }
    }
    Ok(())
}

/// Value surplus of each type at `price` over the cost of `levels`.
fn surpluses(se: &StateEconomy, levels: &[f64], price: &[f64]) -> Vec<f64> {
    se.members
        .iter()
        .zip(levels)
        .map(|(m, &u)| dot(price, &m.endowment) - m.utility.expenditure(price, u))
        .collect()
}

fn value_scale(se: &StateEconomy) -> f64 {
    1.0 + se.aggregate_endowment().iter().sum::<f64>()
}

fn supported_price(se: &StateEconomy, levels: &[f64], bundles: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let tol = tol * value_scale(se);
    let mut candidates: Vec<Vec<f64>> = se
        .members
        .iter()
        .zip(bundles)
        .filter_map(|(m, x)| m.utility.gradient(x))
        .map(|g| {
            let s: f64 = g.iter().sum();
            g.into_iter().map(|v| v / s).collect()
        })
        .collect();
    if let Some((p, _)) = minimize_on_simplex(se.goods, |p| {
        surpluses(se, levels, p).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }) {
        candidates.push(p);
    }
    candidates
        .into_iter()
        .find(|p| p.iter().all(|&v| v > 0.0) && surpluses(se, levels, p).iter().all(|&d| d <= tol))
}

fn subsets(atoms: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u64..(1u64 << atoms.len()))
        .map(|mask| {
            (0..atoms.len())
                .filter(|&j| mask >> j & 1 == 1)
                .map(|j| atoms[j])
                .collect()
        })
        .collect();
    out.sort_by_key(|s: &Vec<usize>| s.len());
    out
}

/// The dual bound `W_A` for a fixed atom subset; `None` beyond three goods.
fn dual_bound(se: &StateEconomy, levels: &[f64], atom_set: &[usize]) -> Option<f64> {
    let atomless: Vec<usize> = (0..se.members.len())
        .filter(|&i| se.members[i].kind == Kind::Atomless)
        .collect();
    if atom_set.is_empty() {
        if atomless.is_empty() {
            return Some(f64::NEG_INFINITY);
        }
        minimize_on_simplex(se.goods, |p| {
            let d = surpluses(se, levels, p);
            atomless.iter().map(|&i| d[i]).fold(f64::NEG_INFINITY, f64::max)
        })
        .map(|r| r.1)
    } else {
        minimize_on_simplex(se.goods, |p| {
            let d = surpluses(se, levels, p);
            atom_set.iter().map(|&a| se.members[a].mass * d[a]).sum::<f64>()
                + atomless.iter().map(|&i| se.members[i].mass * d[i].max(0.0)).sum::<f64>()
        })
        .map(|r| r.1)
    }
}

fn single_state_program(se: &StateEconomy, levels: &[f64]) -> Program {
    Program {
        goods: se.goods,
        states: 1,
        members: se
            .members
            .iter()
            .zip(levels)
            .map(|(m, &u)| Member {
                endowment: vec![m.endowment.clone()],
                groups: vec![Group::single(0, m.utility.clone(), u)],
            })
            .collect(),
    }
}

fn engine_block(
    se: &StateEconomy,
    levels: &[f64],
    atom_set: &[usize],
    options: &BlockOptions,
) -> Option<BlockCertificate> {
    let program = single_state_program(se, levels);
    let n = se.members.len();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for (i, m) in se.members.iter().enumerate() {
        match m.kind {
            Kind::Atomless => upper[i] = m.mass,
            Kind::Atom if atom_set.contains(&i) => {
                lower[i] = m.mass;
                upper[i] = m.mass;
            }
            Kind::Atom => {}
        }
    }
    let imp = program.search(&lower, &upper, options.eps_block, options.budget)?;
    let coalition = FuzzyCoalition {
        participation: imp.lambda.clone(),
    };
    Some(BlockCertificate {
        state: se.label.clone(),
        coalition,
        bundles: imp.bundles.into_iter().map(|mut b| b.remove(0)).collect(),
        margin: imp.margin,
    })
}

fn individual_block(se: &StateEconomy, levels: &[f64], eps: f64) -> Option<BlockCertificate> {
    let (i, gain) = se
        .members
        .iter()
        .zip(levels)
        .map(|(m, &u)| m.utility.value(&m.endowment) - u)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, g)| if g > b.1 { (i, g) } else { b })
        ;
    if !(gain >= eps) {
        return None;
    }
    let mut participation = vec![0.0; se.members.len()];
    participation[i] = se.members[i].mass;
    Some(BlockCertificate {
        state: se.label.clone(),
        coalition: FuzzyCoalition { participation },
        bundles: se.members.iter().map(|m| m.endowment.clone()).collect(),
        margin: gain,
    })
}

/// Decides whether the state allocation `bundles` is blocked.
pub fn find_block(se: &StateEconomy, bundles: &[Vec<f64>], options: &BlockOptions) -> Result<BlockSearch> {
    se.check()?;
    check_state_bundles(se, bundles)?;
    let levels = se.utilities(bundles);
    let verified = |c: BlockCertificate| c.verify(se, bundles, options.eps_block).ok().map(|_| c);

    if let Some(c) = individual_block(se, &levels, options.eps_block).and_then(verified) {
        return Ok(BlockSearch::Blocked(c));
    }
    if let Some(price) = supported_price(se, &levels, bundles, options.support_tol) {
        return Ok(BlockSearch::Unblocked(Unblocked::Supported { price }));
    }

    let atoms: Vec<usize> = (0..se.members.len())
        .filter(|&i| se.members[i].kind == Kind::Atom)
        .collect();
    if atoms.len() > options.max_atoms {
        return Err(Error::TooLarge(format!("{} atoms exceed the limit of {}", atoms.len(), options.max_atoms)));
    }
    let raised: Vec<f64> = levels.iter().map(|u| u + options.eps_block).collect();
    let tol = options.support_tol * value_scale(se);
    let mut worst = f64::NEG_INFINITY;
    let mut exhaustive = true;
    for set in subsets(&atoms) {
        let has_atomless = se.members.iter().any(|m| m.kind == Kind::Atomless);
        if set.is_empty() && !has_atomless {
            continue;
        }
        let bound = dual_bound(se, &raised, &set);
        match bound {
            Some(w) if w <= tol => {
                worst = worst.max(w);
                continue;
            }
            Some(w) => worst = worst.max(w),
            None => exhaustive = false,
        }
        if let Some(c) = engine_block(se, &levels, &set, options).and_then(verified) {
            return Ok(BlockSearch::Blocked(c));
        }
        if bound.is_some() {
            return Ok(BlockSearch::Undecided(format!(
                "state {}: a coalition with atoms {set:?} blocks by the dual bound {:e} but no \
                 certificate was built within the budget",
                se.label, worst
            )));
        }
    }
    if exhaustive {
        Ok(BlockSearch::Unblocked(Unblocked::DualBound { worst }))
    } else {
        Ok(BlockSearch::Undecided(format!(
            "state {}: no supporting price and no certificate; dual bounds need at most 3 goods",
            se.label
        )))
    }
}

/// Brute-force search over a grid of participations and redistributions.
/// Intended as ground truth for tiny instances. Participations and every
/// good but the last are gridded; in the last good each member but one gets
/// the least amount that reaches its target, found by bisection on its own
/// utility, and the remaining member takes what is left.
pub fn blocking_oracle_grid(
    se: &StateEconomy,
    bundles: &[Vec<f64>],
    grid_step: f64,
    eps_block: f64,
) -> Result<Option<BlockCertificate>> {
    const CAP: f64 = 5e7;
    se.check()?;
    check_state_bundles(se, bundles)?;
    let n = se.members.len();
    if n > 3 || se.goods > 3 || !(grid_step >= 0.02) {
        return Err(Error::TooLarge(format!(
            "oracle supports at most 3 types, 3 goods and step ≥ 0.02 (got {n}, {}, {grid_step})",
            se.goods
        )));
    }
    let steps = (1.0 / grid_step - 1e-9).ceil() as usize;
    let levels = se.utilities(bundles);
    let choices: Vec<Vec<f64>> = se
        .members
        .iter()
        .map(|m| match m.kind {
            Kind::Atom => vec![0.0, m.mass],
            Kind::Atomless => (0..=steps).map(|j| m.mass * j as f64 / steps as f64).collect(),
        })
        .collect();
    let last_good = se.goods - 1;
    let lambda_count: f64 = choices.iter().map(|c| c.len() as f64).product();
    let share_count = ((steps + 1) as f64).powi(((n - 1) * last_good) as i32) * 64.0;
    if lambda_count * share_count > CAP {
        return Err(Error::TooLarge(format!("grid has about {:e} points", lambda_count * share_count)));
    }
    // Target a hair above εblock so rounding in the bisection cannot
    // leave a member just short of it.
    let target = |i: usize| levels[i] + eps_block * (1.0 + 1e-9);

    let mut best: Option<BlockCertificate> = None;
    let mut idx = vec![0usize; n];
    loop {
        let lambda: Vec<f64> = (0..n).map(|i| choices[i][idx[i]]).collect();
        let members: Vec<usize> = (0..n).filter(|&i| lambda[i] > 0.0).collect();
        if !members.is_empty() {
            let total: Vec<f64> = (0..se.goods)
                .map(|k| members.iter().map(|&i| lambda[i] * se.members[i].endowment[k]).sum())
                .collect();
            let (head, last) = (&members[..members.len() - 1], *members.last().unwrap());
            // shares[j][k] in grid units for all but the last member and good.
            let mut shares = vec![0usize; head.len() * last_good];
            loop {
                let mut g: Vec<Vec<f64>> = se.members.iter().map(|m| m.endowment.clone()).collect();
                let mut ok = true;
                for k in 0..last_good {
                    let mut used = 0usize;
                    for (j, &i) in head.iter().enumerate() {
                        let s = shares[j * last_good + k];
                        used += s;
                        g[i][k] = total[k] * s as f64 / steps as f64 / lambda[i];
                    }
                    if used > steps {
                        ok = false;
                        break;
                    }
                    g[last][k] = total[k] * (steps - used) as f64 / steps as f64 / lambda[last];
                }
                let mut left = total[last_good];
                for &i in head {
                    if !ok {
                        break;
                    }
                    match least_amount(&se.members[i].utility, &mut g[i], last_good, left / lambda[i], target(i)) {
                        Some(y) => left -= lambda[i] * y,
                        None => ok = false,
                    }
                }
                if ok {
                    g[last][last_good] = left.max(0.0) / lambda[last];
                    let margin = members
                        .iter()
                        .map(|&i| se.members[i].utility.value(&g[i]) - levels[i])
                        .fold(f64::INFINITY, f64::min);
                    if margin >= eps_block && best.as_ref().map_or(true, |b| margin > b.margin) {
                        best = Some(BlockCertificate {
                            state: se.label.clone(),
                            coalition: FuzzyCoalition {
                                participation: lambda.clone(),
                            },
                            bundles: g,
                            margin,
                        });
                    }
                }
                if !advance(&mut shares, steps) {
                    break;
                }
            }
            if best.is_none() && head.len() == 1 && se.goods == 2 {
                if let Some(g) = exact_split(se, &lambda, head[0], last, &total, &target) {
                    let margin = members
                        .iter()
                        .map(|&i| se.members[i].utility.value(&g[i]) - levels[i])
                        .fold(f64::INFINITY, f64::min);
                    if margin >= eps_block && best.as_ref().map_or(true, |b| margin > b.margin) {
                        best = Some(BlockCertificate {
                            state: se.label.clone(),
                            coalition: FuzzyCoalition {
                                participation: lambda.clone(),
                            },
                            bundles: g,
                            margin,
                        });
                    }
                }
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(best);
            }
            idx[i] += 1;
            if idx[i] < choices[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Two members and two goods: splits the first good exactly. The second
/// good each member needs is convex in the split, so golden section finds
/// the split needing the least of it.
fn exact_split(
    se: &StateEconomy,
    lambda: &[f64],
    h: usize,
    l: usize,
    total: &[f64],
    target: &dyn Fn(usize) -> f64,
) -> Option<Vec<Vec<f64>>> {
    let bundle = |i: usize, s: f64| -> Vec<f64> {
        let share = if i == h { s } else { 1.0 - s };
        vec![total[0] * share / lambda[i], 0.0]
    };
    let need = |i: usize, s: f64| -> Option<f64> {
        let mut x = bundle(i, s);
        least_amount(&se.members[i].utility, &mut x, 1, total[1] / lambda[i], target(i))
    };
    // Each member can reach its target on an interval of splits.
    let edge = |i: usize, rising: bool| -> Option<f64> {
        let ok = |s: f64| {
            let mut x = bundle(i, s);
            x[1] = total[1] / lambda[i];
            se.members[i].utility.value(&x) >= target(i)
        };
        let (mut bad, mut good) = if rising { (0.0, 1.0) } else { (1.0, 0.0) };
        if !ok(good) {
            return None;
        }
        if ok(bad) {
            return Some(bad);
        }
        for _ in 0..64 {
            let mid = 0.5 * (bad + good);
            if ok(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Some(good)
    };
    let (a0, b0) = (edge(h, true)?, edge(l, false)?);
    if a0 > b0 {
        return None;
    }
    let cost = |s: f64| -> f64 {
        match (need(h, s), need(l, s)) {
            (Some(x), Some(y)) => lambda[h] * x + lambda[l] * y,
            _ => f64::INFINITY,
        }
    };
    const R: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a0, b0);
    let (mut c, mut d) = (b - R * (b - a), a + R * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - R * (b - a);
            fc = cost(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + R * (b - a);
            fd = cost(d);
        }
    }
    let s = [0.5 * (a + b), a0, b0]
        .into_iter()
        .min_by(|x, y| cost(*x).total_cmp(&cost(*y)))?;
    let yh = need(h, s)?;
    need(l, s)?;
    let left = total[1] - lambda[h] * yh;
    if left < 0.0 {
        return None;
    }
    let mut g: Vec<Vec<f64>> = se.members.iter().map(|m| m.endowment.clone()).collect();
    g[h] = bundle(h, s);
    g[h][1] = yh;
    g[l] = bundle(l, s);
    g[l][1] = left / lambda[l];
    Some(g)
}

/// Sets `x[k]` to the least amount in `[0, cap]` with `u(x) ≥ level` and
/// returns it, or `None` if even `cap` falls short.
fn least_amount(u: &crate::utility::UtilitySpec, x: &mut [f64], k: usize, cap: f64, level: f64) -> Option<f64> {
    x[k] = 0.0;
    if u.value(x) >= level {
        return Some(0.0);
    }
    x[k] = cap;
    if !(u.value(x) >= level) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        x[k] = mid;
        if u.value(x) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    x[k] = hi;
    Some(hi)
}

fn advance(counter: &mut [usize], max: usize) -> bool {
    for c in counter.iter_mut() {
        if *c < max {
            *c += 1;
            return true;
        }
        *c = 0;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpostVerdict {
    InCore,
    Blocked,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpostOptions {
    pub block: BlockOptions,
    /// Also run the grid oracle on every state with this step.
    pub oracle_step: Option<f64>,
}

impl Default for ExpostOptions {
    fn default() -> Self {
        ExpostOptions {
            block: BlockOptions::default(),
            oracle_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateOutcome {
    pub state: String,
    pub search: BlockSearch,
    /// Oracle result when requested: whether it found a block.
    pub oracle_blocked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpostReport {
    pub verdict: ExpostVerdict,
    pub states: Vec<StateOutcome>,
    pub certificate: Option<BlockCertificate>,
    pub notes: Vec<String>,
}

/// Checks every state's allocation for blocks; in the core iff none blocks.
pub fn expost_core_check(economy: &Economy, allocation: &Allocation, options: &ExpostOptions) -> Result<ExpostReport> {
    allocation.check_feasible(economy)?;
    let states: Vec<StateOutcome> = (0..economy.n_states())
        .into_par_iter()
        .map(|s| {
            let se = economy.state_economy(s);
            let bundles = allocation.state_bundles(s);
            let mut search = find_block(&se, &bundles, &options.block)?;
            let mut oracle_blocked = None;
            if let Some(step) = options.oracle_step {
                let found = blocking_oracle_grid(&se, &bundles, step, options.block.eps_block)?;
                oracle_blocked = Some(found.is_some());
                if let (Some(c), false) = (found, matches!(search, BlockSearch::Blocked(_))) {
                    search = BlockSearch::Blocked(c);
                }
            }
            Ok(StateOutcome {
                state: se.label.clone(),
                search,
                oracle_blocked,
            })
        })
        .collect::<Result<_>>()?;
    let certificate = states.iter().find_map(|o| match &o.search {
        BlockSearch::Blocked(c) => Some(c.clone()),
        _ => None,
    });
    let verdict = if certificate.is_some() {
        ExpostVerdict::Blocked
    } else if states.iter().any(|o| matches!(o.search, BlockSearch::Undecided(_))) {
        ExpostVerdict::Undecided
    } else {
        ExpostVerdict::InCore
    };
    let mut notes = vec![
        "atomless types form fuzzy coalitions; atoms join whole or not at all".to_string(),
    ];
    if economy.has_atoms() {
        notes.push(
            "with atoms, unblocked verdicts rest on the dual bounds over every atom subset".to_string(),
        );
    }
    Ok(ExpostReport {
        verdict,
        states,
        certificate,
        notes,
    })
}

/// The blocking assignment over all states: certificate bundles for
/// participants on the states where the coalition's endowment total matches
/// the blocking state's, endowments elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpostAssignment {
    pub event: Vec<usize>,
    pub assignment: Allocation,
}

pub fn expost_block_to_assignment(economy: &Economy, certificate: &BlockCertificate) -> Result<ExpostAssignment> {
    let s0 = economy
        .states()
        .index_of(&certificate.state)
        .ok_or_else(|| Error::StaleCertificate(format!("unknown state {}", certificate.state)))?;
    let lambda = &certificate.coalition.participation;
    if lambda.len() != economy.n_types() || certificate.bundles.len() != economy.n_types() {
        return Err(Error::StaleCertificate("certificate does not match the economy".into()));
    }
    let types = economy.types();
    let total = |bundle_of: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
        (0..economy.goods())
            .map(|k| (0..types.len()).filter(|&i| lambda[i] > 0.0).map(|i| lambda[i] * bundle_of(i)[k]).sum())
            .collect()
    };
    let g_total = total(&|i| certificate.bundles[i].clone());
    let at_s0 = total(&|i| types[i].endowment[s0].clone());
    if g_total
        .iter()
        .zip(&at_s0)
        .any(|(a, b)| (a - b).abs() > COALITION_TOL * b.max(1.0))
    {
        return Err(Error::StaleCertificate("coalition bundles do not clear at the blocking state".into()));
    }
    let event: Vec<usize> = (0..economy.n_states())
        .filter(|&s| {
            let e = total(&|i| types[i].endowment[s].clone());
            g_total
                .iter()
                .zip(&e)
                .all(|(a, b)| (a - b).abs() <= COALITION_TOL * b.max(1.0))
        })
        .collect();
    let bundles = types
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (0..economy.n_states())
                .map(|s| {
                    if lambda[i] > 0.0 && event.contains(&s) {
                        certificate.bundles[i].clone()
                    } else {
                        t.endowment[s].clone()
                    }
                })
                .collect()
        })
        .collect();
    Ok(ExpostAssignment {
        event,
        assignment: Allocation::new(bundles),
    })
}
