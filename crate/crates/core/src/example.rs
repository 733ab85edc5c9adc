//! The two-type square-root economy with identically distributed states.

use crate::model::{AgentType, Economy, Kind, StateSpace};
use crate::partitions::Partition;
use crate::utility::UtilitySpec;

/// Equilibrium price of every state.
pub const EXAMPLE_PRICE: [f64; 2] = [0.5, 0.5];
/// Equilibrium bundles of types A and B.
pub const EXAMPLE_BUNDLES: [[f64; 2]; 2] = [[1.5, 1.5], [2.5, 2.5]];

/// Types A and B of mass 1/2 with `√x₁ + √x₂` utility and endowments
/// (1, 2) and (3, 2) in each of `states` equally likely states. A observes
/// the state, B observes nothing.
pub fn example_economy(states: usize) -> Economy {
    assert!(states >= 1, "at least one state");
    let space = StateSpace::uniform(states);
    let u = UtilitySpec::ces(0.5, vec![1.0, 1.0]);
    let prior = space.prob().to_vec();
    let make = |name: &str, endowment: [f64; 2], partition: Partition| AgentType {
        name: name.into(),
        mass: 0.5,
        kind: Kind::Atomless,
        utility: vec![u.clone(); states],
        endowment: vec![endowment.to_vec(); states],
        partition,
        prior: prior.clone(),
    };
    let types = vec![
        make("A", [1.0, 2.0], Partition::discrete(states)),
        make("B", [3.0, 2.0], Partition::trivial(states)),
    ];
    Economy::new(space, 2, types).expect("example economy is valid")
}
