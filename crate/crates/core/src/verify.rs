//! Threshold verification of a witness tree, outermost level first.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::params::{DuplicatePolicy, TPoPParams};
use crate::tree::{ConfirmationOracle, WitnessTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTally {
    pub level: usize,
    /// `M_l`: confirmations collected by surviving parents at `level - 1`.
    pub confirmed: u64,
    /// Smallest `M_l` that passes, i.e. `ceil(t * n_l)`.
    pub required: u64,
    /// Nominal `n_l`.
    pub nominal: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    /// `true` when the prover is judged truthful.
    pub verdict: bool,
    /// Tallies in evaluation order, from level `d` down to the level that
    /// failed (or level 1).
    pub per_level_confirmed: Vec<LevelTally>,
    /// Parents removed for collecting fewer than `t * w_l` confirmations.
    pub eliminated: Vec<AgentId>,
    /// `K_b` for every parent that was evaluated.
    pub per_parent_confirmations: BTreeMap<AgentId, u64>,
    pub failure_level: Option<usize>,
    /// Agents named again after their first appearance in the tree.
    pub duplicates: Vec<AgentId>,
}

impl VerificationOutcome {
    pub fn confirmed_at(&self, level: usize) -> Option<u64> {
        self.per_level_confirmed
            .iter()
            .find(|t| t.level == level)
            .map(|t| t.confirmed)
    }
}

fn check_shape(tree: &WitnessTree, params: &TPoPParams) -> Result<()> {
    if tree.depth() != params.depth() {
        return Err(Error::ShapeMismatch(format!(
            "tree depth {} but parameters have depth {}",
            tree.depth(),
            params.depth()
        )));
    }
    for level in 1..=params.depth() {
        let nodes = tree.level(level);
        if nodes.len() as u64 > params.nominal_size(level) {
            return Err(Error::ShapeMismatch(format!(
                "level {level} holds {} nodes, more than n_{level} = {}",
                nodes.len(),
                params.nominal_size(level)
            )));
        }
        let mut per_parent = vec![0u32; tree.level(level - 1).len()];
        for node in nodes {
            let p = node.parent.expect("non-root nodes have parents");
            per_parent[p] += 1;
            if per_parent[p] > params.witnesses_at(level) {
                return Err(Error::ShapeMismatch(format!(
                    "parent {} at level {} names more than {} witnesses",
                    tree.level(level - 1)[p].agent,
                    level - 1,
                    params.witnesses_at(level)
                )));
            }
        }
    }
    Ok(())
}

/// Marks every repeat naming in breadth-first order; the first appearance of
/// an agent is the legitimate one.
fn repeat_flags(tree: &WitnessTree) -> (Vec<Vec<bool>>, Vec<AgentId>) {
    let mut seen = HashSet::with_capacity(tree.len());
    let mut repeats = Vec::new();
    let flags = tree
        .levels()
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|n| {
                    let repeat = !seen.insert(n.agent);
                    if repeat {
                        repeats.push(n.agent);
                    }
                    repeat
                })
                .collect()
        })
        .collect();
    (flags, repeats)
}

/// Runs threshold verification on `tree`.
///
/// For `l = d..1`, each surviving parent `b` at level `l - 1` collects
/// `K_b` confirmations from its surviving children; `b` is eliminated when
/// `K_b < t * w_l`, and the prover is rejected at level `l` when
/// `M_l = sum K_b < t * n_l` with the nominal `n_l`. After level 1 the prover
/// is truthful unless it was itself eliminated.
pub fn verify<O>(tree: &WitnessTree, params: &TPoPParams, oracle: &O) -> Result<VerificationOutcome>
where
    O: ConfirmationOracle + ?Sized,
{
    check_shape(tree, params)?;
    let (mut removed, duplicates) = repeat_flags(tree);

    let mut outcome = VerificationOutcome {
        verdict: false,
        per_level_confirmed: Vec::with_capacity(params.depth()),
        eliminated: Vec::new(),
        per_parent_confirmations: BTreeMap::new(),
        failure_level: None,
        duplicates,
    };
    if !outcome.duplicates.is_empty() && params.duplicate_policy() == DuplicatePolicy::FailProof {
        return Ok(outcome);
    }

    let threshold = params.threshold();
    for level in (1..=params.depth()).rev() {
        let parents = tree.level(level - 1);
        let mut counts = vec![0u64; parents.len()];
        for (i, child) in tree.level(level).iter().enumerate() {
            if removed[level][i] {
                continue;
            }
            let p = child.parent.expect("non-root nodes have parents");
            if removed[level - 1][p] {
                continue;
            }
            if oracle.confirms(child.agent, parents[p].agent) {
                counts[p] += 1;
            }
        }

        let parent_quorum = threshold.min_count(u64::from(params.witnesses_at(level)));
        let mut confirmed = 0;
        for (p, parent) in parents.iter().enumerate() {
            if removed[level - 1][p] {
                continue;
            }
            confirmed += counts[p];
            outcome
                .per_parent_confirmations
                .insert(parent.agent, counts[p]);
            if counts[p] < parent_quorum {
                removed[level - 1][p] = true;
                outcome.eliminated.push(parent.agent);
            }
        }

        let nominal = params.nominal_size(level);
        let required = threshold.min_count(nominal);
        outcome.per_level_confirmed.push(LevelTally {
            level,
            confirmed,
            required,
            nominal,
        });
        if confirmed < required {
            outcome.failure_level = Some(level);
            return Ok(outcome);
        }
    }

    outcome.verdict = !removed[0][0];
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_tree, Confirmation, ConfirmationTable, TreeNode};

    const G: AgentId = AgentId(0);

    fn a(i: u32) -> AgentId {
        AgentId(i)
    }

    /// g names a1, a2; a1 names a3, a4; a2 names a5, a6. a5 and a6 reject a2.
    fn worked_example() -> (WitnessTree, ConfirmationTable) {
        let c = |w, p, ok| Confirmation {
            witness: a(w),
            parent: a(p),
            confirms: ok,
        };
        let mut table: ConfirmationTable = [
            c(1, 0, true),
            c(2, 0, true),
            c(3, 1, true),
            c(4, 1, true),
            c(5, 2, false),
            c(6, 2, false),
        ]
        .into_iter()
        .collect();
        let params = TPoPParams::new(0.5, vec![2, 2]).unwrap();
        let tree = build_tree(G, &params, &mut table).unwrap();
        assert_eq!(tree.level_counts(), vec![1, 2, 4]);
        (tree, table)
    }

    #[test]
    fn worked_example_half_threshold_is_truthful() {
        let (tree, table) = worked_example();
        let params = TPoPParams::new(0.5, vec![2, 2]).unwrap();
        let out = verify(&tree, &params, &table).unwrap();
        assert!(out.verdict);
        assert_eq!(out.per_parent_confirmations[&a(1)], 2);
        assert_eq!(out.per_parent_confirmations[&a(2)], 0);
        assert_eq!(out.per_parent_confirmations[&G], 1);
        assert_eq!(out.confirmed_at(2), Some(2));
        assert_eq!(out.confirmed_at(1), Some(1));
        assert_eq!(out.eliminated, vec![a(2)]);
        assert_eq!(out.failure_level, None);
    }

    #[test]
    fn worked_example_full_threshold_fails_at_level_two() {
        let (tree, table) = worked_example();
        let out = verify(&tree, &TPoPParams::deep(), &table).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.failure_level, Some(2));
        assert_eq!(
            out.per_level_confirmed,
            vec![LevelTally {
                level: 2,
                confirmed: 2,
                required: 4,
                nominal: 4
            }]
        );
    }

    struct Constant(bool);
    impl ConfirmationOracle for Constant {
        fn candidate_witnesses(&mut self, _: AgentId, _: usize) -> Option<Vec<AgentId>> {
            None
        }
        fn confirms(&self, _: AgentId, _: AgentId) -> bool {
            self.0
        }
    }

    fn full_tree(params: &TPoPParams) -> WitnessTree {
        let mut levels = vec![vec![TreeNode {
            agent: a(0),
            parent: None,
        }]];
        let mut next = 1;
        for l in 1..=params.depth() {
            let mut level = Vec::new();
            for p in 0..levels[l - 1].len() {
                for _ in 0..params.witnesses_at(l) {
                    level.push(TreeNode {
                        agent: a(next),
                        parent: Some(p),
                    });
                    next += 1;
                }
            }
            levels.push(level);
        }
        WitnessTree::from_levels(levels, false).unwrap()
    }

    #[test]
    fn all_confirm_accepts_with_full_levels() {
        for params in [TPoPParams::flat(), TPoPParams::deep()] {
            let tree = full_tree(&params);
            let out = verify(&tree, &params, &Constant(true)).unwrap();
            assert!(out.verdict);
            for l in 1..=params.depth() {
                assert_eq!(out.confirmed_at(l), Some(params.nominal_size(l)));
            }
        }
    }

    #[test]
    fn none_confirm_rejects() {
        let params = TPoPParams::new(0.01, vec![3, 2]).unwrap();
        let out = verify(&full_tree(&params), &params, &Constant(false)).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.failure_level, Some(2));
    }

    #[test]
    fn under_filled_tree_is_judged_against_nominal_sizes() {
        // prover has a single witness who confirms; t = 0.5, w = [2]
        let tree = WitnessTree::from_levels(
            vec![
                vec![TreeNode {
                    agent: a(0),
                    parent: None,
                }],
                vec![TreeNode {
                    agent: a(1),
                    parent: Some(0),
                }],
            ],
            true,
        )
        .unwrap();
        let half = TPoPParams::new(0.5, vec![2]).unwrap();
        assert!(verify(&tree, &half, &Constant(true)).unwrap().verdict);
        let full = TPoPParams::new(1.0, vec![2]).unwrap();
        let out = verify(&tree, &full, &Constant(true)).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.failure_level, Some(1));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let tree = full_tree(&TPoPParams::deep());
        assert!(matches!(
            verify(&tree, &TPoPParams::flat(), &Constant(true)),
            Err(Error::ShapeMismatch(_))
        ));
        let wide = full_tree(&TPoPParams::new(1.0, vec![3]).unwrap());
        assert!(matches!(
            verify(
                &wide,
                &TPoPParams::new(1.0, vec![2]).unwrap(),
                &Constant(true)
            ),
            Err(Error::ShapeMismatch(_))
        ));
    }

    fn tree_with_repeat() -> WitnessTree {
        // g names 1 and 2; 1 names 3 and 4; 2 names 3 (again) and 5.
        let n = |agent, parent| TreeNode {
            agent: a(agent),
            parent: Some(parent),
        };
        WitnessTree::from_levels(
            vec![
                vec![TreeNode {
                    agent: a(0),
                    parent: None,
                }],
                vec![n(1, 0), n(2, 0)],
                vec![n(3, 0), n(4, 0), n(3, 1), n(5, 1)],
            ],
            false,
        )
        .unwrap()
    }

    #[test]
    fn discount_policy_ignores_repeat_naming() {
        let tree = tree_with_repeat();
        let params = TPoPParams::new(0.5, vec![2, 2]).unwrap();
        let out = verify(&tree, &params, &Constant(true)).unwrap();
        assert!(out.verdict);
        assert_eq!(out.duplicates, vec![a(3)]);
        assert_eq!(out.per_parent_confirmations[&a(2)], 1);
        assert_eq!(out.confirmed_at(2), Some(3));

        // with t = 1 agent 2 is one confirmation short, and so is level 2
        let out = verify(&tree, &TPoPParams::deep(), &Constant(true)).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.failure_level, Some(2));
    }

    #[test]
    fn fail_proof_policy_rejects_any_repeat() {
        let tree = tree_with_repeat();
        let params = TPoPParams::new(0.5, vec![2, 2])
            .unwrap()
            .with_duplicate_policy(DuplicatePolicy::FailProof);
        let out = verify(&tree, &params, &Constant(true)).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.duplicates, vec![a(3)]);
        assert!(out.per_level_confirmed.is_empty());
    }

    #[test]
    fn prover_named_as_witness_counts_as_repeat() {
        let tree = WitnessTree::from_levels(
            vec![
                vec![TreeNode {
                    agent: a(0),
                    parent: None,
                }],
                vec![TreeNode {
                    agent: a(1),
                    parent: Some(0),
                }],
                vec![TreeNode {
                    agent: a(0),
                    parent: Some(0),
                }],
            ],
            false,
        )
        .unwrap();
        let params = TPoPParams::new(1.0, vec![1, 1]).unwrap();
        let out = verify(&tree, &params, &Constant(true)).unwrap();
        assert_eq!(out.duplicates, vec![a(0)]);
        assert!(!out.verdict);
        assert_eq!(out.failure_level, Some(2));
    }

    #[test]
    fn outcome_json_shape() {
        let (tree, table) = worked_example();
        let params = TPoPParams::new(0.5, vec![2, 2]).unwrap();
        let out = verify(&tree, &params, &table).unwrap();
        let json = serde_json::to_value(&out).unwrap();
        assert_eq!(json["verdict"], true);
        assert_eq!(json["eliminated"], serde_json::json!([2]));
        assert_eq!(json["per_parent_confirmations"]["1"], 2);
        assert_eq!(json["per_level_confirmed"][0]["level"], 2);
        let back: VerificationOutcome = serde_json::from_value(json).unwrap();
        assert_eq!(back, out);
    }
}
