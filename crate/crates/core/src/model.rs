//! Economies, allocations and price systems over a finite state space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::{join_all, Partition};
use crate::utility::UtilitySpec;
use crate::walras::{StateEconomy, StateMember};

/// Tolerance on probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// Relative tolerance for per-state market clearing of allocations.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Atomless,
    Atom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    labels: Vec<String>,
    prob: Vec<f64>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>, prob: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidEconomy("at least one state is required".into()));
        }
        if labels.len() != prob.len() {
            return Err(Error::InvalidEconomy(format!(
                "{} state labels but {} probabilities",
                labels.len(),
                prob.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidEconomy(format!("duplicate state label {l:?}")));
            }
        }
        check_distribution(&prob).map_err(|e| Error::InvalidEconomy(format!("state probabilities: {e}")))?;
        Ok(StateSpace { labels, prob })
    }

    /// `n` equally likely states labelled `w1`, `w2`, ….
    pub fn uniform(n: usize) -> Self {
        StateSpace {
            labels: (1..=n).map(|i| format!("w{i}")).collect(),
            prob: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn partition_labels(&self, partition: &Partition) -> Vec<Vec<String>> {
        partition
            .cells()
            .iter()
            .map(|cell| cell.iter().map(|&s| self.labels[s].clone()).collect())
            .collect()
    }

    pub fn partition_from_labels(&self, cells: &[Vec<String>]) -> Result<Partition> {
        let mut idx = Vec::with_capacity(cells.len());
        for cell in cells {
            let mut c = Vec::with_capacity(cell.len());
            for l in cell {
                c.push(self.index_of(l).ok_or_else(|| {
                    Error::MalformedPartition(format!("unknown state label {l:?}"))
                })?);
            }
            idx.push(c);
        }
        Partition::new(self.len(), idx)
    }
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if p.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err("entries must be strictly positive".into());
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(format!("entries sum to {total}, not 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentType {
    pub name: String,
    pub mass: f64,
    pub kind: Kind,
    /// One utility per state.
    pub utility: Vec<UtilitySpec>,
    /// States × goods.
    pub endowment: Vec<Vec<f64>>,
    pub partition: Partition,
    pub prior: Vec<f64>,
}

impl AgentType {
    pub fn is_atom(&self) -> bool {
        self.kind == Kind::Atom
    }

    /// Same information, utilities, endowments and prior (mass and name aside).
    pub fn same_characteristics(&self, other: &AgentType) -> bool {
        self.utility == other.utility
            && self.endowment == other.endowment
            && self.partition == other.partition
            && self.prior == other.prior
    }

    pub fn utility_value(&self, state: usize, x: &[f64]) -> f64 {
        self.utility[state].value(x)
    }
}

/// Which of the standing assumptions an economy satisfies.
///
/// Joint measurability (A2 and the measurability parts of A1) is automatic
/// with finitely many states and types and is always reported as true.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub a1: bool,
    pub a1_prime: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    pub a4_prime: bool,
    pub a5: bool,
    pub a6: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    states: StateSpace,
    goods: usize,
    types: Vec<AgentType>,
    assumptions: AssumptionReport,
}

impl Economy {
    /// Validates and assembles an economy from already-typed parts.
    pub fn new(states: StateSpace, goods: usize, types: Vec<AgentType>) -> Result<Self> {
        let assumptions = check_economy(&states, goods, &types)?;
        Ok(Economy {
            states,
            goods,
            types,
            assumptions,
        })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn goods(&self) -> usize {
        self.goods
    }

    pub fn types(&self) -> &[AgentType] {
        &self.types
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn assumptions(&self) -> &AssumptionReport {
        &self.assumptions
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn atoms(&self) -> Vec<usize> {
        (0..self.types.len()).filter(|&i| self.types[i].is_atom()).collect()
    }

    pub fn has_atoms(&self) -> bool {
        self.types.iter().any(AgentType::is_atom)
    }

    /// Distinct information partitions, in order of first appearance.
    pub fn info_classes(&self) -> Vec<Partition> {
        let mut out: Vec<Partition> = Vec::new();
        for t in &self.types {
            if !out.contains(&t.partition) {
                out.push(t.partition.clone());
            }
        }
        out
    }

    /// The complete-information economy of one state.
    pub fn state_economy(&self, state: usize) -> StateEconomy {
        StateEconomy {
            label: self.states.label(state).to_string(),
            goods: self.goods,
            members: self
                .types
                .iter()
                .map(|t| StateMember {
                    mass: t.mass,
                    kind: t.kind,
                    utility: t.utility[state].clone(),
                    endowment: t.endowment[state].clone(),
                })
                .collect(),
        }
    }

    pub fn to_desc(&self) -> EconomyDesc {
        EconomyDesc {
            states: StatesDesc {
                labels: self.states.labels.clone(),
                prob: self.states.prob.clone(),
            },
            goods: self.goods,
            types: self
                .types
                .iter()
                .map(|t| TypeDesc {
                    name: t.name.clone(),
                    mass: t.mass,
                    kind: t.kind,
                    utility: if t.utility.iter().all(|u| *u == t.utility[0]) {
                        UtilityDesc::Constant(t.utility[0].clone())
                    } else {
                        UtilityDesc::PerState(t.utility.clone())
                    },
                    endowment: t.endowment.clone(),
                    partition: self.states.partition_labels(&t.partition),
                    prior: t.prior.clone(),
                })
                .collect(),
        }
    }
}

fn check_economy(states: &StateSpace, goods: usize, types: &[AgentType]) -> Result<AssumptionReport> {
    let invalid = |msg: String| Err(Error::InvalidEconomy(msg));
    let n = states.len();
    if goods < 2 {
        return invalid(format!("at least 2 goods are required, got {goods}"));
    }
    if types.is_empty() {
        return invalid("at least one agent type is required".into());
    }
    let mut notes = Vec::new();
    for (i, t) in types.iter().enumerate() {
        if types[..i].iter().any(|u| u.name == t.name) {
            return invalid(format!("duplicate type name {:?}", t.name));
        }
        if !(t.mass.is_finite() && t.mass > 0.0) {
            return invalid(format!("type {:?}: mass must be positive, got {}", t.name, t.mass));
        }
        if t.utility.len() != n {
            return invalid(format!("type {:?}: {} utilities for {} states", t.name, t.utility.len(), n));
        }
        for (s, u) in t.utility.iter().enumerate() {
            u.check(goods)
                .map_err(|e| Error::InvalidEconomy(format!("type {:?}, state {}: {e}", t.name, states.label(s))))?;
        }
        if t.endowment.len() != n || t.endowment.iter().any(|e| e.len() != goods) {
            return invalid(format!("type {:?}: endowment must be {n} states × {goods} goods", t.name));
        }
        if t.endowment.iter().flatten().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return invalid(format!("type {:?}: endowments must be finite and nonnegative", t.name));
        }
        if t.partition.states() != n {
            return Err(Error::MalformedPartition(format!(
                "type {:?}: partition over {} states, economy has {n}",
                t.name,
                t.partition.states()
            )));
        }
        if t.prior.len() != n {
            return invalid(format!("type {:?}: prior has {} entries for {n} states", t.name, t.prior.len()));
        }
        check_distribution(&t.prior)
            .map_err(|e| Error::InvalidEconomy(format!("type {:?}: prior {e}", t.name)))?;
        for s in 0..n {
            if t.utility[s].is_cobb_douglas() && t.endowment[s].iter().all(|&x| x == 0.0) {
                return invalid(format!(
                    "type {:?} has Cobb-Douglas utility but zero wealth in state {}",
                    t.name,
                    states.label(s)
                ));
            }
        }
    }
    for s in 0..n {
        for k in 0..goods {
            let total: f64 = types.iter().map(|t| t.mass * t.endowment[s][k]).sum();
            if !(total > 0.0) {
                return invalid(format!(
                    "aggregate endowment of good {k} is zero in state {} (A1)",
                    states.label(s)
                ));
            }
        }
    }

    let a1_prime = types
        .iter()
        .all(|t| t.endowment.iter().flatten().all(|&x| x > 0.0));
    let any_cd = types.iter().flat_map(|t| &t.utility).any(UtilitySpec::is_cobb_douglas);
    if any_cd {
        notes.push(
            "Cobb-Douglas utilities are strictly increasing and strictly quasi-concave only on the \
             interior; A3 and A4 are reported false, wealth is strictly positive in every state"
                .into(),
        );
    }
    let classes: Vec<&Partition> = types.iter().map(|t| &t.partition).collect();
    let a5 = join_all(n, classes.iter().copied())?.is_discrete();
    let atoms: Vec<&AgentType> = types.iter().filter(|t| t.is_atom()).collect();
    let a6 = atoms.windows(2).all(|w| w[0].same_characteristics(w[1]));
    if atoms.is_empty() {
        notes.push("no atoms: A6 holds vacuously".into());
    }
    notes.push("A2 and joint measurability are automatic with finitely many states".into());
    Ok(AssumptionReport {
        a1: true,
        a1_prime,
        a2: true,
        a3: !any_cd,
        a4: !any_cd,
        a4_prime: true,
        a5,
        a6,
        notes,
    })
}

/// Structured description of an economy, as read from an economy file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyDesc {
    pub states: StatesDesc,
    pub goods: usize,
    pub types: Vec<TypeDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesDesc {
    pub labels: Vec<String>,
    pub prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDesc {
    pub name: String,
    pub mass: f64,
    pub kind: Kind,
    pub utility: UtilityDesc,
    pub endowment: Vec<Vec<f64>>,
    pub partition: Vec<Vec<String>>,
    pub prior: Vec<f64>,
}

/// A single utility for every state, or one per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtilityDesc {
    Constant(UtilitySpec),
    PerState(Vec<UtilitySpec>),
}

/// Checks a parsed description against every model invariant.
pub fn validate_economy(desc: &EconomyDesc) -> Result<Economy> {
    let states = StateSpace::new(desc.states.labels.clone(), desc.states.prob.clone())?;
    let n = states.len();
    let mut types = Vec::with_capacity(desc.types.len());
    for t in &desc.types {
        let utility = match &t.utility {
            UtilityDesc::Constant(u) => vec![u.clone(); n],
            UtilityDesc::PerState(us) => us.clone(),
        };
        let partition = states.partition_from_labels(&t.partition).map_err(|e| match e {
            Error::MalformedPartition(m) => Error::MalformedPartition(format!("type {:?}: {m}", t.name)),
            other => other,
        })?;
        types.push(AgentType {
            name: t.name.clone(),
            mass: t.mass,
            kind: t.kind,
            utility,
            endowment: t.endowment.clone(),
            partition,
            prior: t.prior.clone(),
        });
    }
    Economy::new(states, desc.goods, types)
}

/// Σ_i mass_i · endowment_i(state).
pub fn aggregate_endowment(economy: &Economy, state: usize) -> Vec<f64> {
    let mut total = vec![0.0; economy.goods];
    for t in &economy.types {
        for (acc, e) in total.iter_mut().zip(&t.endowment[state]) {
            *acc += t.mass * e;
        }
    }
    total
}

/// The associated atomless economy: every atom becomes an atomless type of
/// the same mass and characteristics.
pub fn split_atoms(economy: &Economy) -> Economy {
    let types: Vec<AgentType> = economy
        .types
        .iter()
        .map(|t| AgentType {
            kind: Kind::Atomless,
            ..t.clone()
        })
        .collect();
    Economy::new(economy.states.clone(), economy.goods, types)
        .expect("splitting atoms preserves every invariant")
}

/// Replaces every atom's bundle by the mass-weighted average of the atom
/// sector's bundles, state by state.
pub fn average_atoms(allocation: &Allocation, economy: &Economy) -> Result<Allocation> {
    let atoms = economy.atoms();
    if atoms.is_empty() {
        return Err(Error::NoAtoms);
    }
    allocation.check_dims(economy)?;
    let atom_mass: f64 = atoms.iter().map(|&i| economy.types[i].mass).sum();
    let mut bundles = allocation.bundles.clone();
    for s in 0..economy.n_states() {
        let mut avg = vec![0.0; economy.goods];
        for &i in &atoms {
            for (a, x) in avg.iter_mut().zip(&allocation.bundles[i][s]) {
                *a += economy.types[i].mass * x;
            }
        }
        for a in &mut avg {
            *a /= atom_mass;
        }
        for &i in &atoms {
            bundles[i][s] = avg.clone();
        }
    }
    Ok(Allocation { bundles })
}

/// Per-type, per-state consumption: `bundles[type][state][good]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<Vec<Vec<f64>>>,
}

impl Allocation {
    pub fn new(bundles: Vec<Vec<Vec<f64>>>) -> Self {
        Allocation { bundles }
    }

    /// Builds an allocation and checks it clears every market in every state.
    pub fn feasible(economy: &Economy, bundles: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let a = Allocation { bundles };
        a.check_feasible(economy)?;
        Ok(a)
    }

    /// Everyone consumes their endowment.
    pub fn endowments(economy: &Economy) -> Self {
        Allocation {
            bundles: economy.types.iter().map(|t| t.endowment.clone()).collect(),
        }
    }

    pub fn bundle(&self, t: usize, state: usize) -> &[f64] {
        &self.bundles[t][state]
    }

    /// Bundles of every type in one state.
    pub fn state_bundles(&self, state: usize) -> Vec<Vec<f64>> {
        self.bundles.iter().map(|b| b[state].clone()).collect()
    }

    pub(crate) fn check_dims(&self, economy: &Economy) -> Result<()> {
        if self.bundles.len() != economy.n_types()
            || self
                .bundles
                .iter()
                .any(|b| b.len() != economy.n_states() || b.iter().any(|x| x.len() != economy.goods))
        {
            return Err(Error::Dimension(format!(
                "allocation must be {} types × {} states × {} goods",
                economy.n_types(),
                economy.n_states(),
                economy.goods
            )));
        }
        Ok(())
    }

    /// Largest relative clearing error over states and goods.
    pub fn clearing_error(&self, economy: &Economy) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..economy.n_states() {
            let supply = aggregate_endowment(economy, s);
            for (k, sup) in supply.iter().enumerate() {
                let used: f64 = economy
                    .types
                    .iter()
                    .zip(&self.bundles)
                    .map(|(t, b)| t.mass * b[s][k])
                    .sum();
                worst = worst.max((used - sup).abs() / sup.max(1.0));
            }
        }
        worst
    }

    pub fn check_feasible(&self, economy: &Economy) -> Result<()> {
        self.check_dims(economy)?;
        if self.bundles.iter().flatten().flatten().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Infeasible("bundles must be finite and nonnegative".into()));
        }
        let err = self.clearing_error(economy);
        if err > FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "markets do not clear: relative error {err:e}"
            )));
        }
        Ok(())
    }
}

/// A strictly positive normalized price vector for every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSystem {
    prices: Vec<Vec<f64>>,
}

impl PriceSystem {
    pub fn new(prices: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in prices.iter().enumerate() {
            if row.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
                return Err(Error::InvalidPrices(format!("state {s}: prices must be strictly positive")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidPrices(format!("state {s}: prices sum to {total}, not 1")));
            }
        }
        Ok(PriceSystem { prices })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.prices[state]
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Participation of each type in a coalition, in mass units.
///
/// Atomless types may join fractionally; atoms join whole or not at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyCoalition {
    pub participation: Vec<f64>,
}

impl FuzzyCoalition {
    pub fn new(participation: Vec<f64>, masses: &[f64], kinds: &[Kind]) -> Result<Self> {
        if participation.len() != masses.len() {
            return Err(Error::InvalidCoalition(format!(
                "{} weights for {} types",
                participation.len(),
                masses.len()
            )));
        }
        for (i, &l) in participation.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0 && l <= masses[i]) {
                return Err(Error::InvalidCoalition(format!(
                    "type {i}: participation {l} outside [0, {}]",
                    masses[i]
                )));
            }
            if kinds[i] == Kind::Atom && l != 0.0 && l != masses[i] {
                return Err(Error::InvalidCoalition(format!(
                    "atom {i} cannot participate fractionally ({l} of {})",
                    masses[i]
                )));
            }
        }
        if !(participation.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidCoalition("empty coalition".into()));
        }
        Ok(FuzzyCoalition { participation })
    }

    pub fn for_economy(participation: Vec<f64>, economy: &Economy) -> Result<Self> {
        let masses: Vec<f64> = economy.types.iter().map(|t| t.mass).collect();
        let kinds: Vec<Kind> = economy.types.iter().map(|t| t.kind).collect();
        Self::new(participation, &masses, &kinds)
    }

    pub fn participants(&self) -> Vec<usize> {
        (0..self.participation.len())
            .filter(|&i| self.participation[i] > 0.0)
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.participation.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::example_economy;

    fn two_type_desc() -> EconomyDesc {
        example_economy(2).to_desc()
    }

    #[test]
    fn example_economy_satisfies_standing_assumptions() {
        let e = example_economy(3);
        let a = e.assumptions();
        assert!(a.a1 && a.a2 && a.a3 && a.a4 && a.a1_prime);
    }

    #[test]
    fn zero_aggregate_good_rejected() {
        let mut d = two_type_desc();
        d.types.truncate(1);
        d.types[0].endowment = vec![vec![1.0, 0.0], vec![1.0, 2.0]];
        let err = validate_economy(&d).unwrap_err();
        assert!(matches!(err, Error::InvalidEconomy(m) if m.contains("A1")));
    }

    #[test]
    fn nonpositive_mass_rejected() {
        let mut d = two_type_desc();
        d.types[0].mass = -0.5;
        assert!(validate_economy(&d).is_err());
        d.types[0].mass = 0.0;
        assert!(validate_economy(&d).is_err());
    }

    #[test]
    fn cobb_douglas_needs_wealth() {
        let mut d = two_type_desc();
        d.types[0].utility = UtilityDesc::Constant(UtilitySpec::cobb_douglas(vec![0.5, 0.5]));
        d.types[0].endowment[1] = vec![0.0, 0.0];
        assert!(validate_economy(&d).is_err());
        d.types[0].endowment[1] = vec![0.0, 1.0];
        let e = validate_economy(&d).unwrap();
        assert!(!e.assumptions().a3);
    }

    #[test]
    fn malformed_partition_rejected() {
        let mut d = two_type_desc();
        d.types[0].partition = vec![vec!["w1".into()]];
        assert!(matches!(validate_economy(&d), Err(Error::MalformedPartition(_))));
        d.types[0].partition = vec![vec!["w1".into(), "w2".into()], vec!["w2".into()]];
        assert!(matches!(validate_economy(&d), Err(Error::MalformedPartition(_))));
    }

    #[test]
    fn identical_atoms_satisfy_a6() {
        let mut d = two_type_desc();
        let mut twin = d.types[1].clone();
        twin.name = "B2".into();
        d.types[1].kind = Kind::Atom;
        twin.kind = Kind::Atom;
        d.types.push(twin);
        let e = validate_economy(&d).unwrap();
        assert!(e.assumptions().a6);
        d.types[2].endowment[0][0] += 1.0;
        assert!(!validate_economy(&d).unwrap().assumptions().a6);
    }

    #[test]
    fn validation_is_idempotent() {
        let e = example_economy(4);
        assert_eq!(validate_economy(&e.to_desc()).unwrap(), e);
    }

    #[test]
    fn aggregate_endowment_of_example() {
        let e = example_economy(2);
        for s in 0..2 {
            assert_eq!(aggregate_endowment(&e, s), vec![2.0, 2.0]);
        }
    }

    #[test]
    fn split_atoms_is_identity_without_atoms() {
        let e = example_economy(2);
        assert_eq!(split_atoms(&e), e);
    }

    #[test]
    fn split_atoms_keeps_mass() {
        let mut d = two_type_desc();
        d.types[0].mass = 0.3;
        d.types[0].kind = Kind::Atom;
        let e = validate_economy(&d).unwrap();
        let s = split_atoms(&e);
        assert_eq!(s.types()[0].kind, Kind::Atomless);
        assert_eq!(s.types()[0].mass, 0.3);
        assert_eq!(s.n_types(), e.n_types());
        for st in 0..e.n_states() {
            assert_eq!(aggregate_endowment(&s, st), aggregate_endowment(&e, st));
        }
    }

    #[test]
    fn averaging_equal_atoms() {
        let mut d = two_type_desc();
        for t in &mut d.types {
            t.kind = Kind::Atom;
        }
        let e = validate_economy(&d).unwrap();
        let f = Allocation::new(vec![vec![vec![1.0, 1.0]; 2], vec![vec![3.0, 3.0]; 2]]);
        let g = average_atoms(&f, &e).unwrap();
        assert_eq!(g.bundles, vec![vec![vec![2.0, 2.0]; 2]; 2]);
    }

    #[test]
    fn averaging_single_atom_is_identity() {
        let mut d = two_type_desc();
        d.types[0].kind = Kind::Atom;
        let e = validate_economy(&d).unwrap();
        let f = Allocation::new(vec![vec![vec![1.5, 1.5]; 2], vec![vec![2.5, 2.5]; 2]]);
        assert_eq!(average_atoms(&f, &e).unwrap(), f);
    }

    #[test]
    fn averaging_requires_atoms() {
        let e = example_economy(1);
        let f = Allocation::endowments(&e);
        assert_eq!(average_atoms(&f, &e).unwrap_err(), Error::NoAtoms);
    }

    #[test]
    fn coalition_rules() {
        let masses = [1.0, 0.5];
        let kinds = [Kind::Atomless, Kind::Atom];
        assert!(FuzzyCoalition::new(vec![0.3, 0.5], &masses, &kinds).is_ok());
        assert!(FuzzyCoalition::new(vec![0.3, 0.2], &masses, &kinds).is_err());
        assert!(FuzzyCoalition::new(vec![0.0, 0.0], &masses, &kinds).is_err());
        assert!(FuzzyCoalition::new(vec![1.2, 0.0], &masses, &kinds).is_err());
    }

    #[test]
    fn price_system_checks() {
        assert!(PriceSystem::new(vec![vec![0.5, 0.5]]).is_ok());
        assert!(PriceSystem::new(vec![vec![0.0, 1.0]]).is_err());
        assert!(PriceSystem::new(vec![vec![0.5, 0.6]]).is_err());
    }
}
