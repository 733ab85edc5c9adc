//! Improvement programs for weighted coalitions.
//!
//! A coalition with weights λ_t can give every member group at least its
//! target utility plus ε, using only its own endowments on a set of local
//! states, iff for every nonnegative price system P
//!
//! ```text
//! Σ_t λ_t Σ_G cost_tG(P, target_tG + ε) ≤ Σ_ω P_ω · ē_ω,
//! ```
//!
//! where `cost_tG` is the least expenditure reaching the group's expected
//! utility level. The left minus the right side, ψ(P), is concave and
//! homogeneous of degree one. We maximize it over a normalized simplex by
//! entropic mirror ascent. At an interior maximizer with ψ < 0 the Hicksian
//! bundles leave a strictly positive surplus in every good and state, which
//! is shared out to build an explicit improving assignment.

use crate::simplex::mirror_ascent;
use crate::utility::{UtilitySpec, WealthCurve};

/// Expected-utility requirement of one member over some local states.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub states: Vec<usize>,
    /// Conditional probabilities of `states`, summing to one.
    pub weights: Vec<f64>,
    pub utilities: Vec<UtilitySpec>,
    pub target: f64,
}

impl Group {
    pub fn single(state: usize, utility: UtilitySpec, target: f64) -> Self {
        Group {
            states: vec![state],
            weights: vec![1.0],
            utilities: vec![utility],
            target,
        }
    }

    pub fn value(&self, bundles: &[Vec<f64>]) -> f64 {
        self.states
            .iter()
            .zip(&self.weights)
            .zip(&self.utilities)
            .map(|((&s, w), u)| w * u.value(&bundles[s]))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Member {
    /// Local state × goods.
    pub endowment: Vec<Vec<f64>>,
    /// Disjoint groups covering all local states.
    pub groups: Vec<Group>,
}

#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub goods: usize,
    pub states: usize,
    pub members: Vec<Member>,
}

/// Least cost of reaching expected utility `level` over a group's states at
/// the given local prices, with the cost-minimizing bundle of each state.
pub(crate) fn group_cost(group: &Group, prices: &[Vec<f64>], level: f64) -> (f64, Vec<Vec<f64>>) {
    let n = group.states.len();
    let goods = prices[0].len();
    if !(level > 0.0) {
        return (0.0, vec![vec![0.0; goods]; n]);
    }
    let curves: Vec<WealthCurve> = group
        .states
        .iter()
        .zip(&group.utilities)
        .map(|(&s, u)| u.wealth_curve(&prices[s]))
        .collect();
    let mut wealth = vec![0.0; n];

    // Linear (Cobb-Douglas) states: utility per unit of wealth.
    let mut best_linear: Option<(usize, f64)> = None;
    for (j, c) in curves.iter().enumerate() {
        if let WealthCurve::Linear { coef } = c {
            let rate = group.weights[j] * coef;
            if best_linear.map_or(true, |(_, r)| rate > r) {
                best_linear = Some((j, rate));
            }
        }
    }
    // Power states at shadow cost of utility μ = e^m:
    // y_j = (π_j K_j ρ_j μ)^(1/(1-ρ_j)), contributing π_j K_j y_j^ρ_j.
    let power: Vec<(usize, f64, f64, f64)> = curves
        .iter()
        .enumerate()
        .filter_map(|(j, c)| match *c {
            WealthCurve::Power { coef, rho } => {
                let pk = group.weights[j] * coef;
                Some((j, pk, rho, (pk * rho).ln()))
            }
            WealthCurve::Linear { .. } => None,
        })
        .collect();
    let log_phi = |m: f64| -> (f64, f64) {
        // log Φ(m) and its derivative in m.
        let terms: Vec<(f64, f64)> = power
            .iter()
            .map(|&(_, pk, rho, lr)| {
                let b = rho / (1.0 - rho);
                (pk.ln() + b * (lr + m), b)
            })
            .collect();
        let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        let mut ds = 0.0;
        for (a, b) in &terms {
            let e = (a - top).exp();
            s += e;
            ds += b * e;
        }
        (top + s.ln(), ds / s)
    };
    let fill_power = |m: f64, wealth: &mut [f64]| {
        for &(j, _, rho, lr) in &power {
            wealth[j] = ((lr + m) / (1.0 - rho)).exp();
        }
    };
    let solve_power = |target: f64| -> f64 {
        // Root of log Φ(m) = log target; log Φ is convex and increasing, so
        // Newton from the right converges monotonically.
        let lt = target.ln();
        let mut m = power
            .iter()
            .map(|&(_, pk, rho, lr)| {
                let b = rho / (1.0 - rho);
                (lt - pk.ln()) / b - lr
            })
            .fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..100 {
            let (g, dg) = log_phi(m);
            let step = (g - lt) / dg;
            m -= step;
            if step.abs() <= 1e-15 * (1.0 + m.abs()) {
                break;
            }
        }
        m
    };

    match (best_linear, power.is_empty()) {
        (None, true) => unreachable!("groups have at least one state"),
        (Some((j, rate)), true) => wealth[j] = level / rate,
        (None, false) => {
            let m = solve_power(level);
            fill_power(m, &mut wealth);
        }
        (Some((j, rate)), false) => {
            let m_cap = -rate.ln();
            let (lp, _) = log_phi(m_cap);
            if lp >= level.ln() {
                fill_power(solve_power(level), &mut wealth);
            } else {
                fill_power(m_cap, &mut wealth);
                wealth[j] = (level - lp.exp()) / rate;
            }
        }
    }
    let bundles = group
        .states
        .iter()
        .zip(&group.utilities)
        .zip(&wealth)
        .map(|((&s, u), &y)| u.demand_unchecked(&prices[s], y))
        .collect();
    (wealth.iter().sum(), bundles)
}

/// Outcome of maximizing ψ for fixed weights and margin.
#[derive(Debug, Clone)]
pub(crate) struct Dual {
    /// Normalized simplex point, local state × goods flattened.
    pub q: Vec<f64>,
    pub psi: f64,
    /// Per-member value surplus `P·e_t − Σ_G cost_tG` at the final prices.
    pub deficits: Vec<f64>,
    /// Per-member Hicksian bundles, local state × goods.
    pub bundles: Vec<Vec<Vec<f64>>>,
}

/// A constructed improving assignment.
#[derive(Debug, Clone)]
pub(crate) struct Improvement {
    pub lambda: Vec<f64>,
    /// Per member, local state × goods. Members with zero weight keep their endowment.
    pub bundles: Vec<Vec<Vec<f64>>>,
    /// Smallest gain over participating members' groups.
    pub margin: f64,
}

const MAX_ASCENT: usize = 4000;
const GAP_TOL: f64 = 1e-13;
const RANK_ASCENT: usize = 300;

impl Program {
    fn supply(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let mut total = vec![vec![0.0; self.goods]; self.states];
        for (m, &l) in self.members.iter().zip(lambda) {
            if l > 0.0 {
                for s in 0..self.states {
                    for k in 0..self.goods {
                        total[s][k] += l * m.endowment[s][k];
                    }
                }
            }
        }
        total
    }

    /// Positive normalization weights for the price simplex.
    pub fn scale_for(&self, lambda: &[f64]) -> Vec<f64> {
        let supply = self.supply(lambda);
        let top = supply.iter().flatten().cloned().fold(0.0, f64::max).max(1e-300);
        supply.into_iter().flatten().map(|v| v.max(1e-9 * top)).collect()
    }

    fn evaluate(
        &self,
        lambda: &[f64],
        eps: f64,
        scale: &[f64],
        supply: &[f64],
        q: &[f64],
    ) -> (f64, Vec<f64>, Vec<f64>, Vec<Vec<Vec<f64>>>) {
        let g = self.goods;
        let prices: Vec<Vec<f64>> = (0..self.states)
            .map(|s| (0..g).map(|k| q[s * g + k] / scale[s * g + k]).collect())
            .collect();
        let mut demand = vec![0.0; self.states * g];
        let mut deficits = vec![0.0; self.members.len()];
        let mut bundles = Vec::with_capacity(self.members.len());
        let mut psi = -q.iter().zip(supply).zip(scale).map(|((a, b), c)| a * b / c).sum::<f64>();
        for (t, (m, &l)) in self.members.iter().zip(lambda).enumerate() {
            let mut x = vec![vec![0.0; g]; self.states];
            let mut cost = 0.0;
            for grp in &m.groups {
                let (c, b) = group_cost(grp, &prices, grp.target + eps);
                cost += c;
                for (&s, bs) in grp.states.iter().zip(b) {
                    x[s] = bs;
                }
            }
            let value: f64 = (0..self.states)
                .map(|s| prices[s].iter().zip(&m.endowment[s]).map(|(p, e)| p * e).sum::<f64>())
                .sum();
            deficits[t] = value - cost;
            if l > 0.0 {
                psi += l * cost;
                for s in 0..self.states {
                    for k in 0..g {
                        demand[s * g + k] += l * x[s][k];
                    }
                }
            }
            bundles.push(x);
        }
        let grad = demand
            .iter()
            .zip(supply)
            .zip(scale)
            .map(|((d, e), c)| (d - e) / c)
            .collect();
        (psi, grad, deficits, bundles)
    }

    /// Maximizes ψ over the simplex normalized by `scale`. With `settle`
    /// false the ascent stops as soon as ψ turns positive, since no
    /// assignment can then be built, and the returned ψ is only a lower bound.
    /// With `settle` true it runs a short, loosely converged ascent used to
    /// rank weights.
    pub fn dual(&self, lambda: &[f64], eps: f64, scale: &[f64], warm: Option<&[f64]>, settle: bool) -> Dual {
        let n = self.states * self.goods;
        let supply: Vec<f64> = self.supply(lambda).into_iter().flatten().collect();
        let q = match warm {
            Some(w) if w.len() == n => w.to_vec(),
            _ => vec![1.0 / n as f64; n],
        };
        let grad = |q: &[f64]| self.evaluate(lambda, eps, scale, &supply, q).1;
        let (q, _) = if settle {
            let loose = |x: &[f64], g: &[f64]| {
                let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let size = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                top - x.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() <= 1e-9 * size
            };
            mirror_ascent(q, grad, loose, GAP_TOL, RANK_ASCENT)
        } else {
            let positive = |x: &[f64], g: &[f64]| x.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() > 0.0;
            mirror_ascent(q, grad, positive, GAP_TOL, MAX_ASCENT)
        };
        let (psi, _, deficits, bundles) = self.evaluate(lambda, eps, scale, &supply, &q);
        Dual {
            q,
            psi,
            deficits,
            bundles,
        }
    }

    /// Builds an assignment meeting every target plus `eps` from the dual
    /// prices, or `None` if the Hicksian bundles overshoot the supply.
    pub fn construct(&self, lambda: &[f64], dual: &Dual) -> Option<Improvement> {
        let supply = self.supply(lambda);
        let total: f64 = lambda.iter().sum();
        let mut residual = supply.clone();
        for (x, &l) in dual.bundles.iter().zip(lambda) {
            if l > 0.0 {
                for s in 0..self.states {
                    for k in 0..self.goods {
                        residual[s][k] -= l * x[s][k];
                    }
                }
            }
        }
        if residual.iter().flatten().any(|&r| !(r >= 0.0)) {
            return None;
        }
        let bundles: Vec<Vec<Vec<f64>>> = self
            .members
            .iter()
            .zip(&dual.bundles)
            .zip(lambda)
            .map(|((m, x), &l)| {
                if l > 0.0 {
                    (0..self.states)
                        .map(|s| (0..self.goods).map(|k| x[s][k] + residual[s][k] / total).collect())
                        .collect()
                } else {
                    m.endowment.clone()
                }
            })
            .collect();
        let margin = self.margin(lambda, &bundles);
        Some(Improvement {
            lambda: lambda.to_vec(),
            bundles,
            margin,
        })
    }

    pub fn margin(&self, lambda: &[f64], bundles: &[Vec<Vec<f64>>]) -> f64 {
        self.members
            .iter()
            .zip(bundles)
            .zip(lambda)
            .filter(|(_, &l)| l > 0.0)
            .flat_map(|((m, b), _)| m.groups.iter().map(move |g| g.value(b) - g.target))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest common gain the weights support, found by bisection on ε
    /// with a constructive test at each step.
    pub fn max_margin(&self, lambda: &[f64], floor: f64) -> Option<Improvement> {
        let scale = self.scale_for(lambda);
        let d0 = self.dual(lambda, floor, &scale, None, false);
        let mut best = self.construct(lambda, &d0)?;
        let mut lo = floor;
        let mut warm = d0.q;
        let mut hi = None;
        let mut step = floor.max(1e-3);
        for _ in 0..60 {
            let eps = lo + step;
            let d = self.dual(lambda, eps, &scale, Some(&warm), false);
            match self.construct(lambda, &d) {
                Some(imp) => {
                    lo = eps;
                    warm = d.q;
                    if imp.margin > best.margin {
                        best = imp;
                    }
                    step *= 2.0;
                }
                None => {
                    hi = Some(eps);
                    break;
                }
            }
        }
        let mut hi = hi?;
        for _ in 0..40 {
            if hi - lo <= 1e-7 * (1.0 + lo.abs()) {
                break;
            }
            let eps = 0.5 * (lo + hi);
            let d = self.dual(lambda, eps, &scale, Some(&warm), false);
            match self.construct(lambda, &d) {
                Some(imp) => {
                    lo = eps;
                    warm = d.q;
                    if imp.margin > best.margin {
                        best = imp;
                    }
                }
                None => hi = eps,
            }
        }
        Some(best)
    }

    /// Searches weights in the box `[lower, upper]` for an assignment with
    /// gain at least `floor`. The objective min_P Σ λ_t d_t(P) is concave in λ.
    pub fn search(&self, lower: &[f64], upper: &[f64], floor: f64, rounds: usize) -> Option<Improvement> {
        let n = self.members.len();
        let scale = self.scale_for(upper);
        let free: Vec<usize> = (0..n).filter(|&i| upper[i] > lower[i]).collect();
        let try_lambda = |lambda: &[f64]| -> Option<Improvement> {
            // Golden-section points can round a ulp past the box.
            let lambda: Vec<f64> = (0..n).map(|i| lambda[i].clamp(lower[i], upper[i])).collect();
            if lambda.iter().all(|&l| l <= 0.0) {
                return None;
            }
            self.max_margin(&lambda, floor).filter(|imp| imp.margin >= floor)
        };
        let mut warm: Option<Vec<f64>> = None;
        let objective = |lambda: &[f64], warm: &mut Option<Vec<f64>>| -> (f64, Vec<f64>) {
            let d = self.dual(lambda, floor, &scale, warm.as_deref(), true);
            *warm = Some(d.q.clone());
            (-d.psi, d.deficits)
        };

        if free.len() == 1 {
            let i = free[0];
            let mut lambda = upper.to_vec();
            let (mut a, mut b) = (lower[i], upper[i]);
            for _ in 0..50 {
                let c = b - 0.618_033_988_749_894_8 * (b - a);
                let d = a + 0.618_033_988_749_894_8 * (b - a);
                lambda[i] = c;
                let fc = objective(&lambda, &mut warm).0;
                lambda[i] = d;
                let fd = objective(&lambda, &mut warm).0;
                if fc >= fd {
                    b = d;
                } else {
                    a = c;
                }
                if b - a < 1e-9 * upper[i] {
                    break;
                }
            }
            let mut best = None;
            for v in [0.5 * (a + b), upper[i], lower[i]] {
                lambda[i] = v;
                if let Some(imp) = try_lambda(&lambda) {
                    if best.as_ref().map_or(true, |b: &Improvement| imp.margin > b.margin) {
                        best = Some(imp);
                    }
                }
            }
            return best;
        }

        let mut lambda = upper.to_vec();
        let mut best_val = f64::NEG_INFINITY;
        let mut best_lambda = lambda.clone();
        let width = free.iter().map(|&i| upper[i] - lower[i]).fold(0.0, f64::max);
        for k in 0..rounds.max(1) {
            let (val, d) = objective(&lambda, &mut warm);
            if val > best_val {
                best_val = val;
                best_lambda = lambda.clone();
            }
            if free.is_empty() {
                break;
            }
            let norm = free.iter().map(|&i| d[i] * d[i]).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                break;
            }
            let step = 0.5 * width / ((k + 1) as f64).sqrt();
            for &i in &free {
                lambda[i] = (lambda[i] + step * d[i] / norm).clamp(lower[i], upper[i]);
            }
        }
        if best_val > 0.0 {
            if let Some(imp) = try_lambda(&best_lambda) {
                return Some(imp);
            }
        }
        try_lambda(upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sqrt_sum() -> UtilitySpec {
        UtilitySpec::ces(0.5, vec![1.0, 1.0])
    }

    #[test]
    fn single_state_cost_matches_expenditure() {
        let u = UtilitySpec::ces(0.3, vec![1.0, 2.0]);
        let p = vec![vec![0.4, 0.6]];
        let g = Group::single(0, u.clone(), 2.0);
        let (c, b) = group_cost(&g, &p, 2.0);
        assert_relative_eq!(c, u.expenditure(&p[0], 2.0), max_relative = 1e-12);
        assert_relative_eq!(u.value(&b[0]), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn multi_state_cost_meets_level_with_equal_marginals() {
        let g = Group {
            states: vec![0, 1, 2],
            weights: vec![0.2, 0.5, 0.3],
            utilities: vec![
                UtilitySpec::ces(0.5, vec![1.0, 1.0]),
                UtilitySpec::ces(0.25, vec![2.0, 1.0]),
                UtilitySpec::cobb_douglas(vec![0.5, 0.5]),
            ],
            target: 0.0,
        };
        let p = vec![vec![0.5, 0.5], vec![0.3, 0.7], vec![0.6, 0.4]];
        for level in [0.1, 1.0, 10.0] {
            let (c, b) = group_cost(&g, &p, level);
            assert_relative_eq!(g.value(&b), level, max_relative = 1e-10);
            // No cheaper split: moving a little wealth between states loses.
            let spent: Vec<f64> = b
                .iter()
                .zip(&p)
                .map(|(x, pr)| x.iter().zip(pr).map(|(a, q)| a * q).sum())
                .collect();
            assert_relative_eq!(spent.iter().sum::<f64>(), c, max_relative = 1e-12);
        }
    }

    #[test]
    fn symmetric_pair_improves() {
        let prog = Program {
            goods: 2,
            states: 1,
            members: vec![
                Member {
                    endowment: vec![vec![2.0, 0.0]],
                    groups: vec![Group::single(0, sqrt_sum(), 2f64.sqrt())],
                },
                Member {
                    endowment: vec![vec![0.0, 2.0]],
                    groups: vec![Group::single(0, sqrt_sum(), 2f64.sqrt())],
                },
            ],
        };
        let imp = prog.max_margin(&[0.5, 0.5], 1e-6).unwrap();
        assert_relative_eq!(imp.margin, 2.0 - 2f64.sqrt(), max_relative = 1e-6);
        let found = prog.search(&[0.0, 0.0], &[0.5, 0.5], 1e-6, 30).unwrap();
        assert!(found.margin > 0.5);
    }

    #[test]
    fn walrasian_pair_cannot_improve() {
        let prog = Program {
            goods: 2,
            states: 1,
            members: vec![
                Member {
                    endowment: vec![vec![1.0, 2.0]],
                    groups: vec![Group::single(0, sqrt_sum(), 2.0 * 1.5f64.sqrt())],
                },
                Member {
                    endowment: vec![vec![3.0, 2.0]],
                    groups: vec![Group::single(0, sqrt_sum(), 2.0 * 2.5f64.sqrt())],
                },
            ],
        };
        assert!(prog.search(&[0.0, 0.0], &[0.5, 0.5], 1e-6, 30).is_none());
    }
}
