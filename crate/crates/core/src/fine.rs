//! Fine blocking: coalitions that pool information before blocking.
//!
//! Only two communication systems are searched: full (every member learns
//! the join of the members' partitions) and private (members keep their own
//! partitions). Events are single cells of the join, or of the meet in
//! private mode. A search that finds nothing is therefore not a proof of
//! fine-core membership.

use rayon::prelude::*;

use crate::blocking::{expost_core_check, BlockCertificate, BlockOptions, ExpostOptions, ExpostVerdict, COALITION_TOL};
use crate::error::{Error, Result};
use crate::improve::{Group, Member, Program};
use crate::model::{Allocation, Economy, FuzzyCoalition, Kind};
use crate::partitions::{cond_expect, join_all, Partition};

/// Lower bound on an atomless participant's weight, as a fraction of its mass.
pub const MIN_SHARE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommMode {
    Full,
    Private,
}

impl CommMode {
    pub fn name(self) -> &'static str {
        match self {
            CommMode::Full => "full",
            CommMode::Private => "private",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineOptions {
    pub modes: Vec<CommMode>,
    pub eps_block: f64,
    /// Most (coalition, event) programs examined before giving up.
    pub budget: usize,
    /// Rounds of the weight search per program.
    pub rounds: usize,
}

impl Default for FineOptions {
    fn default() -> Self {
        FineOptions {
            modes: vec![CommMode::Full],
            eps_block: crate::blocking::EPS_BLOCK,
            budget: 10_000,
            rounds: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineBlockCertificate {
    pub coalition: FuzzyCoalition,
    pub mode: CommMode,
    /// Information each type uses; only participants' entries matter.
    pub communication: Vec<Partition>,
    pub event: Vec<usize>,
    /// Per type, per state; participants' bundles on the event matter.
    pub assignment: Allocation,
    pub margin: f64,
}

/// Join of the partitions of all participating types.
pub fn communication_partition(economy: &Economy, coalition: &FuzzyCoalition) -> Result<Partition> {
    let members = coalition.participants();
    if members.is_empty() {
        return Err(Error::InvalidCoalition("empty coalition".into()));
    }
    join_all(economy.n_states(), members.iter().map(|&i| &economy.types()[i].partition))
}

fn meet_all(economy: &Economy, members: &[usize]) -> Result<Partition> {
    let mut out = economy.types()[members[0]].partition.clone();
    for &i in &members[1..] {
        out = out.meet(&economy.types()[i].partition)?;
    }
    Ok(out)
}

impl FineBlockCertificate {
    /// Re-checks the communication system, the event, coalition feasibility
    /// on the event and conditional expected utility gains.
    pub fn verify(&self, economy: &Economy, allocation: &Allocation, eps_block: f64) -> Result<()> {
        let stale = |m: String| Err(Error::StaleCertificate(m));
        let n = economy.n_types();
        if self.communication.len() != n {
            return stale("communication system does not cover every type".into());
        }
        self.assignment.check_dims(economy)?;
        allocation.check_dims(economy)?;
        let coalition = FuzzyCoalition::for_economy(self.coalition.participation.clone(), economy)
            .map_err(|e| Error::StaleCertificate(e.to_string()))?;
        let members = coalition.participants();
        let join = communication_partition(economy, &coalition)?;
        if self.event.is_empty() || self.event.iter().any(|&s| s >= economy.n_states()) {
            return stale("event is empty or out of range".into());
        }
        for &t in &members {
            let g = &self.communication[t];
            if !g.refines(&economy.types()[t].partition)? || !join.refines(g)? {
                return stale(format!("type {t}: information is not a communication system"));
            }
            if !g.contains_event(&self.event) {
                return stale(format!("type {t}: event is not measurable"));
            }
        }
        let lambda = &coalition.participation;
        for &s in &self.event {
            for k in 0..economy.goods() {
                let mut diff = 0.0;
                let mut scale: f64 = 1.0;
                for &t in &members {
                    let g = self.assignment.bundles[t][s][k];
                    if !(g.is_finite() && g >= 0.0) {
                        return stale(format!("type {t}: negative bundle"));
                    }
                    let e = economy.types()[t].endowment[s][k];
                    diff += lambda[t] * (g - e);
                    scale = scale.max(lambda[t] * e);
                }
                if diff.abs() > COALITION_TOL * scale {
                    return stale(format!("coalition does not clear good {k} in state {s}"));
                }
            }
        }
        let gain = self.recomputed_margin(economy, allocation);
        if !(gain >= eps_block) {
            return stale(format!("smallest conditional gain {gain:e} is below {eps_block:e}"));
        }
        if gain < self.margin - 1e-12 * (1.0 + self.margin.abs()) {
            return stale(format!("stated margin {} exceeds actual gain {gain}", self.margin));
        }
        Ok(())
    }

    pub fn recomputed_margin(&self, economy: &Economy, allocation: &Allocation) -> f64 {
        let mut gain = f64::INFINITY;
        for t in self.coalition.participants() {
            let ty = &economy.types()[t];
            let part = &self.communication[t];
            let ug: Vec<f64> = (0..economy.n_states())
                .map(|s| ty.utility[s].value(&self.assignment.bundles[t][s]))
                .collect();
            let uf: Vec<f64> = (0..economy.n_states())
                .map(|s| ty.utility[s].value(&allocation.bundles[t][s]))
                .collect();
            let eg = cond_expect(&ug, part, &ty.prior);
            let ef = cond_expect(&uf, part, &ty.prior);
            for &s in &self.event {
                gain = gain.min(eg[s] - ef[s]);
            }
        }
        gain
    }

    /// The same block restricted to one cell of the event's communication
    /// partition.
    pub fn restrict(&self, economy: &Economy, state: usize) -> Result<FineBlockCertificate> {
        if !self.event.contains(&state) {
            return Err(Error::InvalidCoalition(format!("state {state} is outside the event")));
        }
        let join = communication_partition(economy, &self.coalition)?;
        let cell = join.cell(state).to_vec();
        Ok(FineBlockCertificate {
            event: cell,
            ..self.clone()
        })
    }
}

/// Improvement program for the members of `support` on `event`, where each
/// member's requirement groups are the cells of its information inside the
/// event.
fn event_program(
    economy: &Economy,
    allocation: &Allocation,
    support: &[usize],
    info: &[Partition],
    event: &[usize],
) -> Program {
    let local = |s: usize| event.iter().position(|&e| e == s).unwrap();
    let members = support
        .iter()
        .map(|&t| {
            let ty = &economy.types()[t];
            let mut groups = Vec::new();
            for cell in info[t].cells() {
                if !event.contains(&cell[0]) {
                    continue;
                }
                let mass: f64 = cell.iter().map(|&s| ty.prior[s]).sum();
                let weights: Vec<f64> = cell.iter().map(|&s| ty.prior[s] / mass).collect();
                let target = cell
                    .iter()
                    .zip(&weights)
                    .map(|(&s, w)| w * ty.utility[s].value(&allocation.bundles[t][s]))
                    .sum();
                groups.push(Group {
                    states: cell.iter().map(|&s| local(s)).collect(),
                    weights,
                    utilities: cell.iter().map(|&s| ty.utility[s].clone()).collect(),
                    target,
                });
            }
            Member {
                endowment: event.iter().map(|&s| ty.endowment[s].clone()).collect(),
                groups,
            }
        })
        .collect();
    Program {
        goods: economy.goods(),
        states: event.len(),
        members,
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_event(
    economy: &Economy,
    allocation: &Allocation,
    support: &[usize],
    info: &[Partition],
    event: &[usize],
    mode: CommMode,
    lower: &[f64],
    upper: &[f64],
    eps_block: f64,
    rounds: usize,
) -> Option<FineBlockCertificate> {
    let program = event_program(economy, allocation, support, info, event);
    let imp = program.search(lower, upper, eps_block, rounds)?;
    let n = economy.n_types();
    let mut participation = vec![0.0; n];
    let mut bundles: Vec<Vec<Vec<f64>>> = economy.types().iter().map(|t| t.endowment.clone()).collect();
    for (j, &t) in support.iter().enumerate() {
        participation[t] = imp.lambda[j];
        for (li, &s) in event.iter().enumerate() {
            bundles[t][s] = imp.bundles[j][li].clone();
        }
    }
    let cert = FineBlockCertificate {
        coalition: FuzzyCoalition { participation },
        mode,
        communication: info.to_vec(),
        event: event.to_vec(),
        assignment: Allocation::new(bundles),
        margin: imp.margin,
    };
    cert.verify(economy, allocation, eps_block).ok().map(|_| cert)
}

fn weight_box(economy: &Economy, support: &[usize]) -> (Vec<f64>, Vec<f64>) {
    support
        .iter()
        .map(|&t| {
            let ty = &economy.types()[t];
            match ty.kind {
                Kind::Atom => (ty.mass, ty.mass),
                Kind::Atomless => (MIN_SHARE * ty.mass, ty.mass),
            }
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub enum FineSearch {
    Found(FineBlockCertificate),
    NoneFound { examined: usize },
    Undecided { examined: usize },
}

/// Enumerates supports, communication modes and events, and searches each
/// for an improving assignment.
pub fn find_fine_block(economy: &Economy, allocation: &Allocation, options: &FineOptions) -> Result<FineSearch> {
    allocation.check_feasible(economy)?;
    let n = economy.n_types();
    if n > 16 {
        return Err(Error::TooLarge(format!("{n} types")));
    }
    let mut supports: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
        .collect();
    supports.sort_by_key(|s: &Vec<usize>| s.len());

    let mut jobs = Vec::new();
    for &mode in &options.modes {
        for support in &supports {
            let join = join_all(economy.n_states(), support.iter().map(|&i| &economy.types()[i].partition))?;
            let (info, events): (Vec<Partition>, Vec<Vec<usize>>) = match mode {
                CommMode::Full => (vec![join.clone(); n], join.cells().to_vec()),
                CommMode::Private => (
                    economy.types().iter().map(|t| t.partition.clone()).collect(),
                    meet_all(economy, support)?.cells().to_vec(),
                ),
            };
            for event in events {
                jobs.push((mode, support.clone(), info.clone(), event));
            }
        }
    }
    let over = jobs.len() > options.budget;
    jobs.truncate(options.budget);
    let examined = jobs.len();
    let found = jobs.par_iter().find_map_first(|(mode, support, info, event)| {
        let (lower, upper) = weight_box(economy, support);
        solve_event(
            economy,
            allocation,
            support,
            info,
            event,
            *mode,
            &lower,
            &upper,
            options.eps_block,
            options.rounds,
        )
    });
    Ok(match found {
        Some(c) => FineSearch::Found(c),
        None if over => FineSearch::Undecided { examined },
        None => FineSearch::NoneFound { examined },
    })
}

/// Turns an ex-post block into a full-communication fine block, widening the
/// coalition with small masses of every missing information class.
pub fn expost_to_fine_block(
    economy: &Economy,
    allocation: &Allocation,
    certificate: &BlockCertificate,
    options: &FineOptions,
) -> Result<FineBlockCertificate> {
    let report = economy.assumptions();
    if !report.a5 {
        return Err(Error::Precondition("the join of all information partitions is not discrete".into()));
    }
    if economy.has_atoms() && !report.a6 {
        return Err(Error::Precondition("atoms do not share the same characteristics".into()));
    }
    allocation.check_feasible(economy)?;
    let s0 = economy
        .states()
        .index_of(&certificate.state)
        .ok_or_else(|| Error::StaleCertificate(format!("unknown state {}", certificate.state)))?;
    certificate.verify(&economy.state_economy(s0), &allocation.state_bundles(s0), options.eps_block)?;

    let types = economy.types();
    let original = certificate.coalition.participants();
    let atoms_used: Vec<usize> = original.iter().copied().filter(|&i| types[i].is_atom()).collect();
    let mut atom_choices = Vec::new();
    if atoms_used.len() > 1 {
        atom_choices.push(vec![atoms_used[0]]);
    }
    atom_choices.push(atoms_used.clone());

    for atoms in atom_choices {
        let mut delta = 0.1;
        for _ in 0..8 {
            let mut support: Vec<usize> = original.iter().copied().filter(|&i| !types[i].is_atom()).collect();
            support.extend(&atoms);
            let added = widen(economy, &support);
            support.extend(&added);
            support.sort_unstable();
            let join = join_all(economy.n_states(), support.iter().map(|&i| &types[i].partition))?;
            let event = join.cell(s0).to_vec();
            let info = vec![join.clone(); economy.n_types()];
            let (mut lower, mut upper) = weight_box(economy, &support);
            for (j, &t) in support.iter().enumerate() {
                if added.contains(&t) && !types[t].is_atom() {
                    lower[j] = 1e-2 * delta * types[t].mass;
                    upper[j] = delta * types[t].mass;
                }
            }
            if let Some(c) = solve_event(
                economy,
                allocation,
                &support,
                &info,
                &event,
                CommMode::Full,
                &lower,
                &upper,
                options.eps_block,
                options.rounds,
            ) {
                return Ok(c);
            }
            delta *= 0.5;
        }
    }
    Err(Error::Undecided(format!(
        "no fine block built from the ex-post block at state {}",
        certificate.state
    )))
}

/// Atomless types to add so that every information class is represented;
/// an atom only when a class has no atomless member.
fn widen(economy: &Economy, support: &[usize]) -> Vec<usize> {
    let types = economy.types();
    let mut added = Vec::new();
    for class in economy.info_classes() {
        if support.iter().any(|&i| types[i].partition == class) {
            continue;
        }
        let atomless: Vec<usize> = (0..types.len())
            .filter(|&i| types[i].partition == class && !types[i].is_atom() && !support.contains(&i))
            .collect();
        if atomless.is_empty() {
            if let Some(a) = (0..types.len()).find(|&i| types[i].partition == class && !support.contains(&i)) {
                added.push(a);
            }
        } else {
            added.extend(atomless);
        }
    }
    added
}

#[derive(Debug, Clone, PartialEq)]
pub enum FineVerdict {
    NoFineBlockFound,
    Blocked(FineBlockCertificate),
    Undecided(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineReport {
    pub verdict: FineVerdict,
    pub modes: Vec<CommMode>,
    pub budget: usize,
    pub examined: usize,
    pub disclosure: String,
}

pub const DISCLOSURE: &str = "only full and private communication systems are searched, with events \
restricted to single cells; finding no fine block does not prove fine-core membership";

/// Looks for a fine block, first through the ex-post core check when the
/// economy allows the constructive path, then by direct search.
pub fn verify_fine_core_candidate(economy: &Economy, allocation: &Allocation, options: &FineOptions) -> Result<FineReport> {
    allocation.check_feasible(economy)?;
    let report = |verdict, examined| FineReport {
        verdict,
        modes: options.modes.clone(),
        budget: options.budget,
        examined,
        disclosure: DISCLOSURE.to_string(),
    };
    let a = economy.assumptions();
    if a.a5 && (a.a6 || !economy.has_atoms()) && options.modes.contains(&CommMode::Full) {
        let expost = expost_core_check(
            economy,
            allocation,
            &ExpostOptions {
                block: BlockOptions {
                    eps_block: options.eps_block,
                    ..BlockOptions::default()
                },
                oracle_step: None,
            },
        )?;
        if expost.verdict == ExpostVerdict::Blocked {
            if let Some(cert) = &expost.certificate {
                if let Ok(c) = expost_to_fine_block(economy, allocation, cert, options) {
                    return Ok(report(FineVerdict::Blocked(c), 0));
                }
            }
        }
    }
    Ok(match find_fine_block(economy, allocation, options)? {
        FineSearch::Found(c) => report(FineVerdict::Blocked(c), 0),
        FineSearch::NoneFound { examined } => report(FineVerdict::NoFineBlockFound, examined),
        FineSearch::Undecided { examined } => report(
            FineVerdict::Undecided(format!("budget of {} programs exhausted", options.budget)),
            examined,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocking::{find_block, BlockSearch};
    use crate::example::example_economy;
    use crate::model::{validate_economy, UtilityDesc};
    use crate::ree::{construct_ree, ReeOptions};
    use crate::utility::UtilitySpec;
    use crate::walras::WalrasOptions;

    /// Two states, A sees them, B does not; endowments in w1 are not
    /// Pareto optimal.
    fn two_state() -> Economy {
        let mut d = example_economy(2).to_desc();
        d.types[0].endowment = vec![vec![2.0, 0.0], vec![1.0, 1.0]];
        d.types[1].endowment = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        d.types[0].utility = UtilityDesc::Constant(UtilitySpec::ces(0.5, vec![1.0, 1.0]));
        validate_economy(&d).unwrap()
    }

    #[test]
    fn communication_of_examples() {
        let e = two_state();
        let c = FuzzyCoalition::for_economy(vec![0.5, 0.0], &e).unwrap();
        assert_eq!(communication_partition(&e, &c).unwrap(), Partition::discrete(2));
        let c = FuzzyCoalition::for_economy(vec![0.5, 0.5], &e).unwrap();
        assert_eq!(communication_partition(&e, &c).unwrap(), Partition::discrete(2));
        let c = FuzzyCoalition::for_economy(vec![0.0, 0.5], &e).unwrap();
        assert!(communication_partition(&e, &c).unwrap().is_trivial());
    }

    #[test]
    fn endowments_fine_blocked_on_first_state() {
        let e = two_state();
        let f = Allocation::endowments(&e);
        let FineSearch::Found(c) = find_fine_block(&e, &f, &FineOptions::default()).unwrap() else {
            panic!("expected a fine block")
        };
        assert_eq!(c.event, vec![0]);
        c.verify(&e, &f, 1e-6).unwrap();
    }

    #[test]
    fn ree_is_not_fine_blocked() {
        let e = example_economy(2);
        let r = construct_ree(&e, &WalrasOptions::default(), &ReeOptions::default()).unwrap();
        let opts = FineOptions {
            modes: vec![CommMode::Full, CommMode::Private],
            ..FineOptions::default()
        };
        assert_eq!(
            find_fine_block(&e, &r.allocation, &opts).unwrap(),
            FineSearch::NoneFound { examined: 9 }
        );
    }

    #[test]
    fn single_state_agrees_with_expost() {
        let mut d = example_economy(1).to_desc();
        d.types[0].endowment = vec![vec![2.0, 0.5]];
        let e = validate_economy(&d).unwrap();
        let f = Allocation::endowments(&e);
        let fine = find_fine_block(&e, &f, &FineOptions::default()).unwrap();
        let expost = find_block(&e.state_economy(0), &f.state_bundles(0), &BlockOptions::default()).unwrap();
        assert!(matches!(fine, FineSearch::Found(_)));
        assert!(matches!(expost, BlockSearch::Blocked(_)));
    }

    #[test]
    fn expost_block_becomes_fine_block() {
        let e = two_state();
        let f = Allocation::endowments(&e);
        let report = expost_core_check(&e, &f, &ExpostOptions::default()).unwrap();
        let cert = report.certificate.unwrap();
        let fine = expost_to_fine_block(&e, &f, &cert, &FineOptions::default()).unwrap();
        assert_eq!(fine.event, vec![0]);
        assert_eq!(fine.coalition.participants(), vec![0, 1]);
        fine.verify(&e, &f, 1e-6).unwrap();
    }

    #[test]
    fn restriction_keeps_certificate_valid() {
        let e = two_state();
        let f = Allocation::endowments(&e);
        let FineSearch::Found(c) = find_fine_block(&e, &f, &FineOptions::default()).unwrap() else {
            panic!()
        };
        c.restrict(&e, c.event[0]).unwrap().verify(&e, &f, 1e-6).unwrap();
    }

    #[test]
    fn tampered_event_rejected() {
        let e = two_state();
        let f = Allocation::endowments(&e);
        let FineSearch::Found(mut c) = find_fine_block(&e, &f, &FineOptions::default()).unwrap() else {
            panic!()
        };
        c.event = vec![0, 1];
        assert!(c.verify(&e, &f, 1e-6).is_err());
    }
}
