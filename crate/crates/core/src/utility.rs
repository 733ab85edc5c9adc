//! Utility families and their closed-form demand and expenditure functions.
//!
//! CES utilities are the additive form `u(x) = Σ a_k x_k^ρ` with `0 < ρ < 1`,
//! which is continuous, strictly increasing and strictly concave on the whole
//! nonnegative orthant. Cobb-Douglas utilities are `u(x) = Π x_k^α_k` with
//! exponents summing to one; they are only strictly monotone on the interior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum UtilitySpec {
    #[serde(rename = "CES")]
    Ces { rho: f64, weights: Vec<f64> },
    #[serde(rename = "CobbDouglas")]
    CobbDouglas { weights: Vec<f64> },
}

/// Indirect utility as a function of wealth at fixed prices.
///
/// Both families have indirect utility of the form `K · w^ρ` (CES) or `C · w`
/// (Cobb-Douglas), which is what the multi-state expenditure problem needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum WealthCurve {
    Power { coef: f64, rho: f64 },
    Linear { coef: f64 },
}

impl UtilitySpec {
    pub fn ces(rho: f64, weights: Vec<f64>) -> Self {
        UtilitySpec::Ces { rho, weights }
    }

    pub fn cobb_douglas(weights: Vec<f64>) -> Self {
        UtilitySpec::CobbDouglas { weights }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            UtilitySpec::Ces { weights, .. } | UtilitySpec::CobbDouglas { weights } => weights,
        }
    }

    pub fn goods(&self) -> usize {
        self.weights().len()
    }

    pub fn is_cobb_douglas(&self) -> bool {
        matches!(self, UtilitySpec::CobbDouglas { .. })
    }

    /// Checks the parameter invariants for an economy with `goods` commodities.
    pub fn check(&self, goods: usize) -> std::result::Result<(), String> {
        let w = self.weights();
        if w.len() != goods {
            return Err(format!("{} weights for {} goods", w.len(), goods));
        }
        if w.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err("weights must be finite and strictly positive".into());
        }
        match self {
            UtilitySpec::Ces { rho, .. } => {
                if !(rho.is_finite() && *rho > 0.0 && *rho < 1.0) {
                    return Err(format!("CES exponent {rho} outside (0, 1)"));
                }
            }
            UtilitySpec::CobbDouglas { weights } => {
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(format!("Cobb-Douglas exponents sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            UtilitySpec::Ces { rho, weights } => weights
                .iter()
                .zip(x)
                .map(|(a, &xk)| a * xk.max(0.0).powf(*rho))
                .sum(),
            UtilitySpec::CobbDouglas { weights } => {
                if x.iter().any(|&xk| xk <= 0.0) {
                    return 0.0;
                }
                weights
                    .iter()
                    .zip(x)
                    .map(|(a, &xk)| a * xk.ln())
                    .sum::<f64>()
                    .exp()
            }
        }
    }

    /// Gradient at a strictly positive bundle; `None` on the boundary.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if x.iter().any(|&xk| !(xk > 0.0)) {
            return None;
        }
        Some(match self {
            UtilitySpec::Ces { rho, weights } => weights
                .iter()
                .zip(x)
                .map(|(a, &xk)| a * rho * xk.powf(rho - 1.0))
                .collect(),
            UtilitySpec::CobbDouglas { weights } => {
                let u = self.value(x);
                weights.iter().zip(x).map(|(a, &xk)| a * u / xk).collect()
            }
        })
    }

    /// Marshallian demand at a strictly positive price and nonnegative wealth.
    pub fn demand(&self, price: &[f64], wealth: f64) -> Result<Vec<f64>> {
        check_price(price)?;
        Ok(self.demand_unchecked(price, wealth))
    }

    pub(crate) fn demand_unchecked(&self, price: &[f64], wealth: f64) -> Vec<f64> {
        if !(wealth > 0.0) {
            return vec![0.0; price.len()];
        }
        match self {
            UtilitySpec::Ces { rho, weights } => {
                let s = ces_shares(*rho, weights, price);
                let cost: f64 = price.iter().zip(&s).map(|(p, sk)| p * sk).sum();
                s.iter().map(|sk| wealth * sk / cost).collect()
            }
            UtilitySpec::CobbDouglas { weights } => weights
                .iter()
                .zip(price)
                .map(|(a, p)| a * wealth / p)
                .collect(),
        }
    }

    pub(crate) fn wealth_curve(&self, price: &[f64]) -> WealthCurve {
        match self {
            UtilitySpec::Ces { rho, weights } => {
                let s = ces_shares(*rho, weights, price);
                let cost: f64 = price.iter().zip(&s).map(|(p, sk)| p * sk).sum();
                let level: f64 = weights.iter().zip(&s).map(|(a, sk)| a * sk.powf(*rho)).sum();
                WealthCurve::Power {
                    coef: level / cost.powf(*rho),
                    rho: *rho,
                }
            }
            UtilitySpec::CobbDouglas { weights } => {
                let log_c: f64 = weights
                    .iter()
                    .zip(price)
                    .map(|(a, p)| a * (a / p).ln())
                    .sum();
                WealthCurve::Linear { coef: log_c.exp() }
            }
        }
    }

    /// Utility attained by optimal spending of `wealth` at `price`.
    pub fn indirect(&self, price: &[f64], wealth: f64) -> f64 {
        if !(wealth > 0.0) {
            return 0.0;
        }
        match self.wealth_curve(price) {
            WealthCurve::Power { coef, rho } => coef * wealth.powf(rho),
            WealthCurve::Linear { coef } => coef * wealth,
        }
    }

    /// Least cost of reaching utility `level` at `price`.
    pub fn expenditure(&self, price: &[f64], level: f64) -> f64 {
        if !(level > 0.0) {
            return 0.0;
        }
        match self.wealth_curve(price) {
            WealthCurve::Power { coef, rho } => (level / coef).powf(1.0 / rho),
            WealthCurve::Linear { coef } => level / coef,
        }
    }

    /// Cost-minimizing bundle for utility `level` at `price`.
    pub fn hicksian(&self, price: &[f64], level: f64) -> Vec<f64> {
        let cost = self.expenditure(price, level);
        self.demand_unchecked(price, cost)
    }
}

pub(crate) fn check_price(price: &[f64]) -> Result<()> {
    for (good, &value) in price.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositivePrice { good, value });
        }
    }
    Ok(())
}

// Relative spending directions s_k = (p_k / a_k)^(1/(ρ-1)), rescaled by their
// maximum; demand and expenditure are invariant to the rescaling.
fn ces_shares(rho: f64, weights: &[f64], price: &[f64]) -> Vec<f64> {
    let expo = 1.0 / (rho - 1.0);
    let logs: Vec<f64> = price
        .iter()
        .zip(weights)
        .map(|(p, a)| (p.ln() - a.ln()) * expo)
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logs.iter().map(|l| (l - top).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sqrt_sum() -> UtilitySpec {
        UtilitySpec::ces(0.5, vec![1.0, 1.0])
    }

    #[test]
    fn ces_demand_at_uniform_price() {
        let x = sqrt_sum().demand(&[0.5, 0.5], 1.5).unwrap();
        assert_relative_eq!(x[0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(x[1], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn cobb_douglas_demand_closed_form() {
        let x = UtilitySpec::cobb_douglas(vec![0.5, 0.5])
            .demand(&[0.5, 0.5], 2.0)
            .unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_wealth_gives_zero_bundle() {
        let x = sqrt_sum().demand(&[0.3, 0.7], 0.0).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn nonpositive_price_rejected() {
        let err = sqrt_sum().demand(&[0.0, 1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { good: 0, .. }));
    }

    #[test]
    fn expenditure_inverts_indirect_utility() {
        for spec in [
            UtilitySpec::ces(0.3, vec![1.0, 2.0, 0.5]),
            UtilitySpec::cobb_douglas(vec![0.2, 0.3, 0.5]),
        ] {
            let p = [0.2, 0.5, 0.3];
            let v = spec.indirect(&p, 3.0);
            assert_relative_eq!(spec.expenditure(&p, v), 3.0, max_relative = 1e-12);
            let h = spec.hicksian(&p, v);
            assert_relative_eq!(spec.value(&h), v, max_relative = 1e-12);
        }
    }

    #[test]
    fn parameter_checks() {
        assert!(UtilitySpec::ces(1.0, vec![1.0, 1.0]).check(2).is_err());
        assert!(UtilitySpec::ces(0.5, vec![1.0, 0.0]).check(2).is_err());
        assert!(UtilitySpec::cobb_douglas(vec![0.5, 0.6]).check(2).is_err());
        assert!(UtilitySpec::cobb_douglas(vec![0.5, 0.5]).check(3).is_err());
        assert!(sqrt_sum().check(2).is_ok());
    }
}
