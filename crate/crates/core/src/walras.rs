//! Complete-information state economies: demand, excess demand and
//! Walrasian equilibrium.
//!
//! Equilibria need not be unique. [`solve_walras`] returns the first one it
//! reaches from the uniform price, deterministically.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Allocation, Economy, Kind, PriceSystem};
use crate::utility::{check_price, UtilitySpec};

/// One agent type as seen in a single state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMember {
    pub mass: f64,
    pub kind: Kind,
    pub utility: UtilitySpec,
    pub endowment: Vec<f64>,
}

/// The complete-information economy of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEconomy {
    pub label: String,
    pub goods: usize,
    pub members: Vec<StateMember>,
}

impl StateEconomy {
    pub fn aggregate_endowment(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.goods];
        for m in &self.members {
            for (acc, e) in total.iter_mut().zip(&m.endowment) {
                *acc += m.mass * e;
            }
        }
        total
    }

    pub fn check(&self) -> Result<()> {
        if self.goods < 2 || self.members.is_empty() {
            return Err(Error::InvalidEconomy(format!(
                "state {}: need at least 2 goods and one type",
                self.label
            )));
        }
        for m in &self.members {
            m.utility
                .check(self.goods)
                .map_err(|e| Error::InvalidEconomy(format!("state {}: {e}", self.label)))?;
            if !(m.mass > 0.0) || m.endowment.len() != self.goods {
                return Err(Error::InvalidEconomy(format!("state {}: malformed member", self.label)));
            }
        }
        if self.aggregate_endowment().iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidEconomy(format!(
                "state {}: aggregate endowment is not strictly positive",
                self.label
            )));
        }
        Ok(())
    }

    pub fn utilities(&self, bundles: &[Vec<f64>]) -> Vec<f64> {
        self.members
            .iter()
            .zip(bundles)
            .map(|(m, x)| m.utility.value(x))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalrasOptions {
    /// Max-norm bound on excess demand, in commodity units.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound on any price coordinate during the search.
    pub price_floor: f64,
}

impl Default for WalrasOptions {
    fn default() -> Self {
        WalrasOptions {
            tol: 1e-10,
            max_iter: 10_000,
            price_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalrasResult {
    pub price: Vec<f64>,
    pub bundles: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
}

/// Marshallian demand; the zero bundle at zero wealth.
pub fn demand(utility: &UtilitySpec, price: &[f64], wealth: f64) -> Result<Vec<f64>> {
    utility.demand(price, wealth)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn demands(se: &StateEconomy, price: &[f64]) -> Vec<Vec<f64>> {
    se.members
        .iter()
        .map(|m| m.utility.demand_unchecked(price, dot(price, &m.endowment)))
        .collect()
}

fn excess_unchecked(se: &StateEconomy, price: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; se.goods];
    for m in &se.members {
        let x = m.utility.demand_unchecked(price, dot(price, &m.endowment));
        for k in 0..se.goods {
            z[k] += m.mass * (x[k] - m.endowment[k]);
        }
    }
    z
}

/// Aggregate excess demand `Σ m_i (x_i(p, ⟨p, e_i⟩) − e_i)`.
pub fn excess_demand(se: &StateEconomy, price: &[f64]) -> Result<Vec<f64>> {
    if price.len() != se.goods {
        return Err(Error::Dimension(format!("price has {} entries for {} goods", price.len(), se.goods)));
    }
    check_price(price)?;
    Ok(excess_unchecked(se, price))
}

fn sup_norm(z: &[f64]) -> f64 {
    z.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn normalize(p: &mut [f64], floor: f64) {
    for x in p.iter_mut() {
        *x = x.max(floor);
    }
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= s;
    }
}

/// Solves one state economy for an equilibrium price on the open simplex.
pub fn solve_walras(se: &StateEconomy, options: &WalrasOptions) -> Result<WalrasResult> {
    se.check()?;
    let (price, iterations) = if se.goods == 2 {
        bisect_two_goods(se, options)
    } else {
        newton_tatonnement(se, options)
    };
    let residual = sup_norm(&excess_unchecked(se, &price));
    if !(residual <= options.tol) {
        return Err(Error::NoConvergence {
            state: se.label.clone(),
            residual,
            iterations,
        });
    }
    Ok(WalrasResult {
        bundles: demands(se, &price),
        price,
        residual,
        iterations,
    })
}

// With gross substitutes, z_1 is decreasing in p_1 along the edge of Δ.
fn bisect_two_goods(se: &StateEconomy, options: &WalrasOptions) -> (Vec<f64>, usize) {
    let floor = options.price_floor;
    let (mut lo, mut hi) = (floor, 1.0 - floor);
    let mut best = (f64::INFINITY, vec![0.5, 0.5]);
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let p = vec![mid, 1.0 - mid];
        let z = excess_unchecked(se, &p);
        let r = sup_norm(&z);
        if r < best.0 {
            best = (r, p);
        }
        if r == 0.0 || mid <= lo || mid >= hi {
            break;
        }
        if z[0] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (best.1, iterations)
}

// Newton on the first ℓ−1 relative excess demands in log-price coordinates
// (last price fixed before normalization), falling back to a damped
// tâtonnement step whenever the line search stalls.
fn newton_tatonnement(se: &StateEconomy, options: &WalrasOptions) -> (Vec<f64>, usize) {
    let l = se.goods;
    let supply = se.aggregate_endowment();
    let floor_log = options.price_floor.ln();
    let price_of = |y: &[f64]| -> Vec<f64> {
        let top = y.iter().cloned().fold(0.0f64, f64::max);
        let mut p: Vec<f64> = y.iter().map(|v| (v - top).exp()).collect();
        p.push((-top).exp());
        normalize(&mut p, options.price_floor);
        p
    };
    let rel = |p: &[f64]| -> Vec<f64> {
        let z = excess_unchecked(se, p);
        z.iter().zip(&supply).map(|(a, b)| a / b).collect()
    };
    let merit = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut y = vec![0.0; l - 1];
    let mut p = price_of(&y);
    let mut r = rel(&p);
    let mut gamma = 1.0;
    let mut best = (sup_norm(&excess_unchecked(se, &p)), p.clone());
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let abs_res = sup_norm(&excess_unchecked(se, &p));
        if abs_res < best.0 {
            best = (abs_res, p.clone());
        }
        if abs_res <= 0.1 * options.tol {
            break;
        }
        let f0 = &r[..l - 1];
        let mut jac = DMatrix::<f64>::zeros(l - 1, l - 1);
        for j in 0..l - 1 {
            let h = 1e-7 * (1.0 + y[j].abs());
            let mut yp = y.clone();
            yp[j] += h;
            let rp = rel(&price_of(&yp));
            for i in 0..l - 1 {
                jac[(i, j)] = (rp[i] - f0[i]) / h;
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(f0))
            .filter(|s| s.iter().all(|v| v.is_finite()));
        let m0 = merit(&r);
        let mut accepted = false;
        if let Some(step) = step {
            let mut t = 1.0;
            for _ in 0..30 {
                let yn: Vec<f64> = y
                    .iter()
                    .zip(step.iter())
                    .map(|(a, s)| (a - t * s).max(floor_log))
                    .collect();
                let pn = price_of(&yn);
                let rn = rel(&pn);
                if merit(&rn) < m0 {
                    y = yn;
                    p = pn;
                    r = rn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            let mut moved = false;
            for _ in 0..30 {
                let top = r[l - 1];
                let yn: Vec<f64> = y
                    .iter()
                    .zip(&r)
                    .map(|(a, ri)| (a + gamma * (ri - top)).max(floor_log))
                    .collect();
                let pn = price_of(&yn);
                let rn = rel(&pn);
                if merit(&rn) < m0 {
                    y = yn;
                    p = pn;
                    r = rn;
                    gamma *= 1.5;
                    moved = true;
                    break;
                }
                gamma *= 0.3;
            }
            if !moved {
                break;
            }
        }
    }
    let abs_res = sup_norm(&excess_unchecked(se, &p));
    if abs_res < best.0 {
        best = (abs_res, p);
    }
    (best.1, iterations)
}

/// Checks market clearing, budget exhaustion and demand optimality within `tol`.
pub fn is_walras_eq(se: &StateEconomy, price: &[f64], bundles: &[Vec<f64>], tol: f64) -> bool {
    if price.len() != se.goods
        || bundles.len() != se.members.len()
        || bundles.iter().any(|b| b.len() != se.goods)
        || check_price(price).is_err()
    {
        return false;
    }
    for k in 0..se.goods {
        let z: f64 = se
            .members
            .iter()
            .zip(bundles)
            .map(|(m, x)| m.mass * (x[k] - m.endowment[k]))
            .sum();
        if z.abs() > tol {
            return false;
        }
    }
    se.members.iter().zip(bundles).all(|(m, x)| {
        let wealth = dot(price, &m.endowment);
        let best = m.utility.demand_unchecked(price, wealth);
        (dot(price, x) - wealth).abs() <= tol
            && x.iter().zip(&best).all(|(a, b)| (a - b).abs() <= tol)
    })
}

/// Equilibrium prices and bundles for every state, solved independently.
#[derive(Debug, Clone, PartialEq)]
pub struct WalrasSelection {
    pub prices: PriceSystem,
    pub allocation: Allocation,
    pub results: Vec<WalrasResult>,
}

pub fn walras_selection(economy: &Economy, options: &WalrasOptions) -> Result<WalrasSelection> {
    let results: Vec<WalrasResult> = (0..economy.n_states())
        .into_par_iter()
        .map(|s| solve_walras(&economy.state_economy(s), options))
        .collect::<Result<_>>()?;
    let prices = PriceSystem::new(results.iter().map(|r| r.price.clone()).collect())?;
    let bundles = (0..economy.n_types())
        .map(|t| results.iter().map(|r| r.bundles[t].clone()).collect())
        .collect();
    Ok(WalrasSelection {
        prices,
        allocation: Allocation::new(bundles),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::example_economy;
    use approx::assert_relative_eq;

    fn member(mass: f64, utility: UtilitySpec, endowment: Vec<f64>) -> StateMember {
        StateMember {
            mass,
            kind: Kind::Atomless,
            utility,
            endowment,
        }
    }

    fn sqrt_sum() -> UtilitySpec {
        UtilitySpec::ces(0.5, vec![1.0, 1.0])
    }

    #[test]
    fn example_state_economy_equilibrium() {
        let se = example_economy(1).state_economy(0);
        let z = excess_demand(&se, &[0.5, 0.5]).unwrap();
        assert!(sup_norm(&z) < 1e-14);
        let r = solve_walras(&se, &WalrasOptions::default()).unwrap();
        assert_relative_eq!(r.price[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(r.bundles[0][0], 1.5, epsilon = 1e-9);
        assert_relative_eq!(r.bundles[1][1], 2.5, epsilon = 1e-9);
        assert!(is_walras_eq(&se, &r.price, &r.bundles, 1e-9));
    }

    #[test]
    fn swapped_bundles_are_not_equilibrium() {
        let se = example_economy(1).state_economy(0);
        let bundles = vec![vec![2.5, 2.5], vec![1.5, 1.5]];
        assert!(!is_walras_eq(&se, &[0.5, 0.5], &bundles, 1e-9));
    }

    #[test]
    fn symmetric_economy_clears_at_uniform_price() {
        let se = StateEconomy {
            label: "w".into(),
            goods: 2,
            members: vec![
                member(0.5, sqrt_sum(), vec![2.0, 0.0]),
                member(0.5, sqrt_sum(), vec![0.0, 2.0]),
            ],
        };
        assert!(sup_norm(&excess_demand(&se, &[0.5, 0.5]).unwrap()) < 1e-14);
    }

    #[test]
    fn single_type_is_no_trade() {
        let u = UtilitySpec::ces(0.3, vec![1.0, 2.0, 0.5]);
        let e = vec![1.0, 2.0, 3.0];
        let se = StateEconomy {
            label: "w".into(),
            goods: 3,
            members: vec![member(1.0, u.clone(), e.clone())],
        };
        let r = solve_walras(&se, &WalrasOptions::default()).unwrap();
        let g = u.gradient(&e).unwrap();
        let s: f64 = g.iter().sum();
        for k in 0..3 {
            assert_relative_eq!(r.price[k], g[k] / s, epsilon = 1e-9);
            assert_relative_eq!(r.bundles[0][k], e[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn three_goods_mixed_families() {
        let se = StateEconomy {
            label: "w".into(),
            goods: 3,
            members: vec![
                member(0.7, UtilitySpec::ces(0.25, vec![1.0, 3.0, 0.2]), vec![4.0, 0.1, 0.3]),
                member(1.3, UtilitySpec::cobb_douglas(vec![0.6, 0.1, 0.3]), vec![0.2, 2.0, 5.0]),
                member(0.4, UtilitySpec::ces(0.8, vec![0.5, 0.5, 2.0]), vec![1.0, 1.0, 0.0]),
            ],
        };
        let r = solve_walras(&se, &WalrasOptions::default()).unwrap();
        assert!(r.residual <= 1e-10);
        assert!(is_walras_eq(&se, &r.price, &r.bundles, 1e-9));
    }

    #[test]
    fn selection_of_example_is_constant() {
        let e = example_economy(5);
        let sel = walras_selection(&e, &WalrasOptions::default()).unwrap();
        for row in sel.prices.rows() {
            assert_relative_eq!(row[0], 0.5, epsilon = 1e-10);
        }
        sel.allocation.check_feasible(&e).unwrap();
    }

    #[test]
    fn invalid_price_rejected() {
        let se = example_economy(1).state_economy(0);
        assert!(excess_demand(&se, &[0.0, 1.0]).is_err());
        assert!(excess_demand(&se, &[1.0]).is_err());
    }
}
