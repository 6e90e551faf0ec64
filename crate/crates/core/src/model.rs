//! Graphical model: agents with iid Bernoulli honesty and coercion states,
//! confirmations given by a fixed truth table, and Monte-Carlo estimation of
//! reliability and security over the `(p_h, p_c)` grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::grid::{cell_rng, map_cells, GridSpec};
use crate::metrics::{Confusion, MapKind, MapSource, PerformanceMap, MIN_CONFIDENT_SAMPLES};
use crate::params::TPoPParams;
use crate::tree::{build_tree, ConfirmationOracle, TreeNode, WitnessTree};
use crate::verify::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeState {
    pub honest: bool,
    pub coerced: bool,
}

impl NodeState {
    pub const HONEST: NodeState = NodeState::new(true, false);
    pub const HONEST_COERCED: NodeState = NodeState::new(true, true);
    pub const DISHONEST_COERCED: NodeState = NodeState::new(false, true);
    pub const DISHONEST: NodeState = NodeState::new(false, false);

    /// Truth-table order.
    pub const ALL: [NodeState; 4] = [
        Self::HONEST,
        Self::HONEST_COERCED,
        Self::DISHONEST_COERCED,
        Self::DISHONEST,
    ];

    pub const fn new(honest: bool, coerced: bool) -> Self {
        NodeState { honest, coerced }
    }

    pub fn table_index(self) -> usize {
        match (self.honest, self.coerced) {
            (true, false) => 0,
            (true, true) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    }

    /// Bernoulli product probability of this state under `priors`.
    pub fn probability(self, priors: StatePriors) -> f64 {
        let h = if self.honest {
            priors.p_h
        } else {
            1.0 - priors.p_h
        };
        let c = if self.coerced {
            priors.p_c
        } else {
            1.0 - priors.p_c
        };
        h * c
    }

    pub fn sample<R: Rng + ?Sized>(priors: StatePriors, rng: &mut R) -> Self {
        let honest = rng.random_bool(priors.p_h);
        let coerced = rng.random_bool(priors.p_c);
        NodeState { honest, coerced }
    }
}

/// Probabilities of an agent being honest and being coerced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePriors {
    pub p_h: f64,
    pub p_c: f64,
}

impl StatePriors {
    pub fn new(p_h: f64, p_c: f64) -> Result<Self> {
        for (name, p) in [("p_h", p_h), ("p_c", p_c)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(StatePriors { p_h, p_c })
    }
}

/// Whether a witness confirms its parent, by the two agents' states.
/// Rows are the parent, columns the witness, both in [`NodeState::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthTable([[bool; 4]; 4]);

pub const TRUTH_TABLE: TruthTable = TruthTable([
    [true, true, true, true],
    [true, true, false, false],
    [true, false, true, false],
    [true, false, false, true],
]);

impl TruthTable {
    pub fn confirms(&self, parent: NodeState, witness: NodeState) -> bool {
        self.0[parent.table_index()][witness.table_index()]
    }

    pub fn rows(&self) -> &[[bool; 4]; 4] {
        &self.0
    }
}

pub fn confirm_states(parent: NodeState, witness: NodeState) -> bool {
    TRUTH_TABLE.confirms(parent, witness)
}

/// Oracle over synthetic agents whose ids index `states`. Every naming hands
/// out fresh ids, so trees are always full and never repeat an agent.
struct StateOracle<'a> {
    states: &'a [NodeState],
    next: u32,
}

impl ConfirmationOracle for StateOracle<'_> {
    fn candidate_witnesses(&mut self, parent: AgentId, quota: usize) -> Option<Vec<AgentId>> {
        if parent.0 as usize >= self.states.len() {
            return None;
        }
        let start = self.next;
        let end = (start + quota as u32).min(self.states.len() as u32);
        self.next = end;
        Some((start..end).map(AgentId).collect())
    }

    fn confirms(&self, witness: AgentId, parent: AgentId) -> bool {
        confirm_states(
            self.states[parent.0 as usize],
            self.states[witness.0 as usize],
        )
    }
}

fn judge(params: &TPoPParams, states: &[NodeState]) -> bool {
    let mut oracle = StateOracle { states, next: 1 };
    let tree = build_tree(AgentId(0), params, &mut oracle).expect("root is known");
    debug_assert!(!tree.under_filled());
    verify(&tree, params, &oracle)
        .expect("tree built from the same parameters")
        .verdict
}

/// Draws a state for the root and every witness of a full tree and returns
/// the root's state with the verification verdict.
pub fn sample_tree_outcome_with<R: Rng + ?Sized>(
    params: &TPoPParams,
    priors: StatePriors,
    rng: &mut R,
) -> (NodeState, bool) {
    let states: Vec<NodeState> = (0..params.tree_size())
        .map(|_| NodeState::sample(priors, rng))
        .collect();
    (states[0], judge(params, &states))
}

pub fn sample_tree_outcome(
    params: &TPoPParams,
    priors: StatePriors,
    seed: u64,
) -> (NodeState, bool) {
    sample_tree_outcome_with(params, priors, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Monte-Carlo estimate for one `(p_h, p_c)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub confusion: Confusion,
}

impl CellEstimate {
    pub fn reliability(&self) -> Option<f64> {
        self.confusion.reliability()
    }

    pub fn security(&self) -> Option<f64> {
        self.confusion.security()
    }

    pub fn honest_roots(&self) -> u64 {
        self.confusion.honest()
    }

    pub fn dishonest_roots(&self) -> u64 {
        self.confusion.dishonest()
    }

    pub fn low_confidence(&self) -> bool {
        self.honest_roots() < MIN_CONFIDENT_SAMPLES
            || self.dishonest_roots() < MIN_CONFIDENT_SAMPLES
    }
}

pub fn estimate_cell_with<R: Rng + ?Sized>(
    params: &TPoPParams,
    priors: StatePriors,
    n_trees: u64,
    rng: &mut R,
) -> CellEstimate {
    let mut confusion = Confusion::default();
    for _ in 0..n_trees {
        let (root, verdict) = sample_tree_outcome_with(params, priors, rng);
        confusion.record(root.honest, verdict);
    }
    CellEstimate { confusion }
}

pub fn estimate_cell(
    params: &TPoPParams,
    priors: StatePriors,
    n_trees: u64,
    seed: u64,
) -> CellEstimate {
    estimate_cell_with(
        params,
        priors,
        n_trees,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// Largest tree `exact_cell` will enumerate.
pub const EXACT_NODE_LIMIT: usize = 10;

/// Exact conditional probabilities for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCell {
    pub reliability: Option<f64>,
    pub security: Option<f64>,
}

/// Exact reliability and security by enumerating every joint state
/// assignment of a full tree, weighted by its Bernoulli probability.
pub fn exact_cell(params: &TPoPParams, priors: StatePriors) -> Result<ExactCell> {
    let nodes = params.tree_size() as usize;
    if nodes > EXACT_NODE_LIMIT {
        return Err(Error::TreeTooLarge {
            nodes,
            limit: EXACT_NODE_LIMIT,
        });
    }
    let mut states = vec![NodeState::HONEST; nodes];
    let mut honest_mass = 0.0;
    let mut honest_accepted = 0.0;
    let mut dishonest_mass = 0.0;
    let mut dishonest_rejected = 0.0;
    for code in 0..4usize.pow(nodes as u32) {
        let mut rest = code;
        let mut weight = 1.0;
        for s in states.iter_mut() {
            *s = NodeState::ALL[rest % 4];
            rest /= 4;
            weight *= s.probability(priors);
        }
        if weight == 0.0 {
            continue;
        }
        let verdict = judge(params, &states);
        if states[0].honest {
            honest_mass += weight;
            if verdict {
                honest_accepted += weight;
            }
        } else {
            dishonest_mass += weight;
            if !verdict {
                dishonest_rejected += weight;
            }
        }
    }
    Ok(ExactCell {
        reliability: (honest_mass > 0.0).then(|| (honest_accepted / honest_mass).clamp(0.0, 1.0)),
        security: (dishonest_mass > 0.0)
            .then(|| (dishonest_rejected / dishonest_mass).clamp(0.0, 1.0)),
    })
}

/// Canonical full tree with agents numbered breadth first from 0.
pub fn full_tree(params: &TPoPParams) -> WitnessTree {
    let mut levels = vec![vec![TreeNode {
        agent: AgentId(0),
        parent: None,
    }]];
    let mut next = 1;
    for l in 1..=params.depth() {
        let mut level = Vec::with_capacity(params.nominal_size(l) as usize);
        for p in 0..levels[l - 1].len() {
            for _ in 0..params.witnesses_at(l) {
                level.push(TreeNode {
                    agent: AgentId(next),
                    parent: Some(p),
                });
                next += 1;
            }
        }
        levels.push(level);
    }
    WitnessTree::from_levels(levels, false).expect("well formed")
}

/// Reliability and security maps over the whole grid, one independent RNG
/// stream per cell.
pub fn sweep_grid(
    params: &TPoPParams,
    grid: GridSpec,
    n_trees: u64,
    seed: u64,
) -> Result<(PerformanceMap, PerformanceMap)> {
    if n_trees == 0 {
        return Err(Error::InvalidParams(
            "need at least one tree per cell".into(),
        ));
    }
    let cells = map_cells(grid.cell_count(), |index| {
        let (p_h, p_c) = grid.point(index);
        let priors = StatePriors { p_h, p_c };
        estimate_cell_with(params, priors, n_trees, &mut cell_rng(seed, index)).confusion
    });
    Ok((
        PerformanceMap::from_confusions(grid, MapKind::Reliability, MapSource::Model, &cells)?,
        PerformanceMap::from_confusions(grid, MapKind::Security, MapSource::Model, &cells)?,
    ))
}
