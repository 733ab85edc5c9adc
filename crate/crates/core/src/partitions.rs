//! Finite partitions of the state space.
//!
//! At finite scale a σ-algebra and its generating partition carry the same
//! information, so every information structure in the crate is a
//! [`Partition`]. Partitions are kept in canonical form (cells sorted, cells
//! ordered by their least state) so that equality is structural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PriceSystem;

/// Default max-norm tolerance for treating two price vectors as equal.
pub const PRICE_TOL: f64 = 1e-9;

/// Max-norm tolerance used by [`is_measurable`].
pub const MEASURABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct Partition {
    states: usize,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    states: usize,
    cells: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;
    fn try_from(raw: RawPartition) -> Result<Self> {
        Partition::new(raw.states, raw.cells)
    }
}

impl From<Partition> for RawPartition {
    fn from(p: Partition) -> Self {
        RawPartition {
            states: p.states,
            cells: p.cells,
        }
    }
}

impl Partition {
    /// Builds a partition of `{0, …, states-1}`, rejecting empty, overlapping
    /// or non-covering cells.
    pub fn new(states: usize, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut cell_of = vec![usize::MAX; states];
        for cell in &cells {
            if cell.is_empty() {
                return Err(Error::MalformedPartition("empty cell".into()));
            }
            for &s in cell {
                if s >= states {
                    return Err(Error::MalformedPartition(format!(
                        "state index {s} out of range for {states} states"
                    )));
                }
                if cell_of[s] != usize::MAX {
                    return Err(Error::MalformedPartition(format!(
                        "state {s} appears in more than one cell"
                    )));
                }
                cell_of[s] = 0;
            }
        }
        if let Some(s) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::MalformedPartition(format!(
                "state {s} is not covered by any cell"
            )));
        }
        Ok(Self::canonical(states, cells))
    }

    fn canonical(states: usize, mut cells: Vec<Vec<usize>>) -> Self {
        for cell in &mut cells {
            cell.sort_unstable();
        }
        cells.sort_unstable_by_key(|c| c[0]);
        let mut cell_of = vec![0; states];
        for (i, cell) in cells.iter().enumerate() {
            for &s in cell {
                cell_of[s] = i;
            }
        }
        Partition {
            states,
            cells,
            cell_of,
        }
    }

    /// Groups states by equal key.
    pub fn from_keys<K: PartialEq>(keys: &[K]) -> Self {
        let mut reps: Vec<usize> = Vec::new();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        for (s, k) in keys.iter().enumerate() {
            match reps.iter().position(|&r| keys[r] == *k) {
                Some(i) => cells[i].push(s),
                None => {
                    reps.push(s);
                    cells.push(vec![s]);
                }
            }
        }
        Self::canonical(keys.len(), cells)
    }

    pub fn discrete(states: usize) -> Self {
        Self::canonical(states, (0..states).map(|s| vec![s]).collect())
    }

    pub fn trivial(states: usize) -> Self {
        Self::canonical(states, vec![(0..states).collect()])
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_index(&self, state: usize) -> usize {
        self.cell_of[state]
    }

    /// The cell containing `state`.
    pub fn cell(&self, state: usize) -> &[usize] {
        &self.cells[self.cell_of[state]]
    }

    pub fn is_discrete(&self) -> bool {
        self.cells.len() == self.states
    }

    pub fn is_trivial(&self) -> bool {
        self.cells.len() == 1
    }

    fn same_space(&self, other: &Partition) -> Result<()> {
        if self.states != other.states {
            return Err(Error::StateSpaceMismatch(self.states, other.states));
        }
        Ok(())
    }

    /// Coarsest common refinement: cells are the nonempty pairwise intersections.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        self.same_space(other)?;
        let keys: Vec<(usize, usize)> = (0..self.states)
            .map(|s| (self.cell_of[s], other.cell_of[s]))
            .collect();
        Ok(Partition::from_keys(&keys))
    }

    /// Finest common coarsening: states are linked whenever some cell of
    /// either partition contains both.
    pub fn meet(&self, other: &Partition) -> Result<Partition> {
        self.same_space(other)?;
        let mut parent: Vec<usize> = (0..self.states).collect();
        fn root(parent: &mut [usize], mut s: usize) -> usize {
            while parent[s] != s {
                parent[s] = parent[parent[s]];
                s = parent[s];
            }
            s
        }
        for cell in self.cells.iter().chain(&other.cells) {
            for &s in &cell[1..] {
                let (a, b) = (root(&mut parent, cell[0]), root(&mut parent, s));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let keys: Vec<usize> = (0..self.states).map(|s| root(&mut parent, s)).collect();
        Ok(Partition::from_keys(&keys))
    }

    /// True iff every cell of `self` lies inside some cell of `other`.
    pub fn refines(&self, other: &Partition) -> Result<bool> {
        self.same_space(other)?;
        Ok(self
            .cells
            .iter()
            .all(|cell| cell.iter().all(|&s| other.cell_of[s] == other.cell_of[cell[0]])))
    }

    /// True iff `event` is a union of cells.
    pub fn contains_event(&self, event: &[usize]) -> bool {
        event.iter().all(|&s| {
            self.cell(s).iter().all(|t| event.contains(t))
        })
    }
}

/// Join of several partitions over the same state space.
pub fn join_all<'a, I>(states: usize, parts: I) -> Result<Partition>
where
    I: IntoIterator<Item = &'a Partition>,
{
    parts
        .into_iter()
        .try_fold(Partition::trivial(states), |acc, p| acc.join(p))
}

/// Interim information of an agent: private information joined with the
/// information revealed by prices.
pub fn combine_info(agent: &Partition, prices: &Partition) -> Result<Partition> {
    agent.join(prices)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Information revealed by a price system: states are grouped when their
/// price vectors agree within `tol` in the max norm, closed transitively.
pub fn sigma_of_price(prices: &PriceSystem, tol: f64) -> Partition {
    let rows = prices.rows();
    let n = rows.len();
    let mut label: Vec<usize> = (0..n).collect();
    for s in 0..n {
        for t in (s + 1)..n {
            if label[s] != label[t] && max_diff(&rows[s], &rows[t]) <= tol {
                let (keep, drop) = (label[s].min(label[t]), label[s].max(label[t]));
                for l in label.iter_mut() {
                    if *l == drop {
                        *l = keep;
                    }
                }
            }
        }
    }
    Partition::from_keys(&label)
}

/// True when some cell of `partition` holds two states whose price vectors
/// differ, i.e. the grouping relied on the tolerance rather than equality.
pub fn merged_by_tolerance(prices: &PriceSystem, partition: &Partition) -> bool {
    let rows = prices.rows();
    partition
        .cells()
        .iter()
        .any(|cell| cell.iter().any(|&s| rows[s] != rows[cell[0]]))
}

/// Values a function of the state can take for measurability checks.
pub trait StateValue {
    fn distance(&self, other: &Self) -> f64;
}

impl StateValue for f64 {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl StateValue for Vec<f64> {
    fn distance(&self, other: &Self) -> f64 {
        max_diff(self, other)
    }
}

impl StateValue for [f64] {
    fn distance(&self, other: &Self) -> f64 {
        max_diff(self, other)
    }
}

/// True iff `values` is constant (within [`MEASURABILITY_TOL`]) on every cell.
pub fn is_measurable<V: StateValue>(values: &[V], partition: &Partition) -> bool {
    partition.cells().iter().all(|cell| {
        cell.iter()
            .all(|&s| values[s].distance(&values[cell[0]]) <= MEASURABILITY_TOL)
    })
}

/// Conditional expectation of `values` given `partition` under `prior`.
pub fn cond_expect(values: &[f64], partition: &Partition, prior: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for cell in partition.cells() {
        let mass: f64 = cell.iter().map(|&s| prior[s]).sum();
        let mean = cell.iter().map(|&s| prior[s] * values[s]).sum::<f64>() / mass;
        for &s in cell {
            out[s] = mean;
        }
    }
    out
}
