//! Witness trees and breadth-first tree construction.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::agent::AgentId;
use crate::error::{Error, Result};
use crate::params::TPoPParams;

/// The seam between the protocol and whatever decides who sees whom.
///
/// The graphical model answers from a truth table over sampled agent
/// states; the spatial simulator answers from agent geometry.
pub trait ConfirmationOracle {
    /// Agents `parent` may name as witnesses, in naming order. `quota` is the
    /// number the tree builder still needs; oracles may return more or fewer.
    /// Returns `None` when `parent` is unknown to the oracle.
    fn candidate_witnesses(&mut self, parent: AgentId, quota: usize) -> Option<Vec<AgentId>>;

    /// Whether `witness` confirms that `parent` is its neighbour.
    fn confirms(&self, witness: AgentId, parent: AgentId) -> bool;
}

impl<O: ConfirmationOracle + ?Sized> ConfirmationOracle for &mut O {
    fn candidate_witnesses(&mut self, parent: AgentId, quota: usize) -> Option<Vec<AgentId>> {
        (**self).candidate_witnesses(parent, quota)
    }

    fn confirms(&self, witness: AgentId, parent: AgentId) -> bool {
        (**self).confirms(witness, parent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub agent: AgentId,
    /// Index of the parent within the previous level; `None` only for the root.
    pub parent: Option<usize>,
}

/// A prover-rooted tree of witnesses, stored level by level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessTree {
    levels: Vec<Vec<TreeNode>>,
    under_filled: bool,
}

impl WitnessTree {
    /// Assembles a tree from explicit levels, checking only structural sanity
    /// (single root, parent indices in range). Duplicate agents are allowed.
    pub fn from_levels(levels: Vec<Vec<TreeNode>>, under_filled: bool) -> Result<Self> {
        match levels.first().map(Vec::as_slice) {
            Some([root]) if root.parent.is_none() => {}
            _ => {
                return Err(Error::ShapeMismatch(
                    "level 0 must hold exactly one parentless root".into(),
                ))
            }
        }
        for (l, pair) in levels.windows(2).enumerate() {
            let parents = pair[0].len();
            for node in &pair[1] {
                match node.parent {
                    Some(p) if p < parents => {}
                    _ => {
                        return Err(Error::ShapeMismatch(format!(
                            "node {} at level {} has no valid parent",
                            node.agent,
                            l + 1
                        )))
                    }
                }
            }
        }
        Ok(WitnessTree {
            levels,
            under_filled,
        })
    }

    pub fn root(&self) -> AgentId {
        self.levels[0][0].agent
    }

    /// Number of witness levels below the root.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Vec<TreeNode>] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &[TreeNode] {
        &self.levels[l]
    }

    pub fn under_filled(&self) -> bool {
        self.under_filled
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    /// All agents in breadth-first order, duplicates included.
    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.levels.iter().flatten().map(|n| n.agent)
    }

    pub fn parent_agent(&self, level: usize, node: &TreeNode) -> Option<AgentId> {
        node.parent.map(|p| self.levels[level - 1][p].agent)
    }
}

/// Builds the witness tree of `prover` breadth first.
///
/// Every node at level `l - 1` names up to `w_l` witnesses in the oracle's
/// candidate order, skipping agents already in the tree. A node that cannot
/// fill its quota names whatever is available and the tree is flagged
/// under-filled.
pub fn build_tree<O>(prover: AgentId, params: &TPoPParams, oracle: &mut O) -> Result<WitnessTree>
where
    O: ConfirmationOracle + ?Sized,
{
    let mut present: HashSet<AgentId> = HashSet::with_capacity(params.tree_size() as usize);
    present.insert(prover);
    let mut levels = vec![vec![TreeNode {
        agent: prover,
        parent: None,
    }]];
    let mut under_filled = false;
    let mut prover_checked = false;

    for level in 1..=params.depth() {
        let quota = params.witnesses_at(level) as usize;
        let parents = &levels[level - 1];
        let mut next = Vec::with_capacity(parents.len() * quota);
        for (parent_idx, parent) in parents.iter().enumerate() {
            let candidates = match oracle.candidate_witnesses(parent.agent, quota) {
                Some(c) => c,
                None if !prover_checked => return Err(Error::UnknownAgent(prover)),
                None => Vec::new(),
            };
            prover_checked = true;
            let mut named = 0;
            for candidate in candidates {
                if named == quota {
                    break;
                }
                if present.insert(candidate) {
                    next.push(TreeNode {
                        agent: candidate,
                        parent: Some(parent_idx),
                    });
                    named += 1;
                }
            }
            if named < quota {
                under_filled = true;
            }
        }
        levels.push(next);
    }

    Ok(WitnessTree {
        levels,
        under_filled,
    })
}

/// Explicit `(witness, parent) -> confirms` answers, e.g. loaded from JSON.
///
/// Candidate witnesses of a parent are the witnesses listed against it, in
/// insertion order. Pairs that are not listed do not confirm.
#[derive(Debug, Clone, Default)]
pub struct ConfirmationTable {
    answers: HashMap<(AgentId, AgentId), bool>,
    named: HashMap<AgentId, Vec<AgentId>>,
    known: HashSet<AgentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confirmation {
    pub witness: AgentId,
    pub parent: AgentId,
    pub confirms: bool,
}

impl ConfirmationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, witness: AgentId, parent: AgentId, confirms: bool) {
        self.known.insert(witness);
        self.known.insert(parent);
        if self.answers.insert((witness, parent), confirms).is_none() {
            self.named.entry(parent).or_default().push(witness);
        }
    }
}

impl FromIterator<Confirmation> for ConfirmationTable {
    fn from_iter<I: IntoIterator<Item = Confirmation>>(iter: I) -> Self {
        let mut table = ConfirmationTable::new();
        for c in iter {
            table.insert(c.witness, c.parent, c.confirms);
        }
        table
    }
}

impl ConfirmationOracle for ConfirmationTable {
    fn candidate_witnesses(&mut self, parent: AgentId, _quota: usize) -> Option<Vec<AgentId>> {
        if !self.known.contains(&parent) {
            return None;
        }
        Some(self.named.get(&parent).cloned().unwrap_or_default())
    }

    fn confirms(&self, witness: AgentId, parent: AgentId) -> bool {
        self.answers
            .get(&(witness, parent))
            .copied()
            .unwrap_or(false)
    }
}

/// JSON form: a flat node list in breadth-first order. `parent` is the index
/// of the parent entry in `nodes`, which stays unambiguous even when an agent
/// is named twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeJson {
    pub root: AgentId,
    #[serde(default)]
    pub under_filled: bool,
    pub nodes: Vec<NodeJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeJson {
    pub id: AgentId,
    pub level: usize,
    pub parent: Option<usize>,
}

impl From<&WitnessTree> for TreeJson {
    fn from(tree: &WitnessTree) -> Self {
        let mut nodes = Vec::with_capacity(tree.len());
        let mut parent_start = 0;
        for (l, level) in tree.levels.iter().enumerate() {
            let start = nodes.len();
            for node in level {
                nodes.push(NodeJson {
                    id: node.agent,
                    level: l,
                    parent: node.parent.map(|p| parent_start + p),
                });
            }
            parent_start = start;
        }
        TreeJson {
            root: tree.root(),
            under_filled: tree.under_filled,
            nodes,
        }
    }
}

impl TryFrom<TreeJson> for WitnessTree {
    type Error = Error;

    fn try_from(json: TreeJson) -> Result<Self> {
        // flat index -> (level, index within level)
        let mut slot: Vec<(usize, usize)> = Vec::with_capacity(json.nodes.len());
        let mut levels: Vec<Vec<TreeNode>> = Vec::new();
        for (i, node) in json.nodes.iter().enumerate() {
            let parent = match (node.level, node.parent) {
                (0, None) => None,
                (0, Some(_)) => {
                    return Err(Error::ShapeMismatch(format!("root entry {i} has a parent")))
                }
                (_, None) => {
                    return Err(Error::ShapeMismatch(format!(
                        "entry {i} at level {} has no parent",
                        node.level
                    )))
                }
                (level, Some(p)) => {
                    let &(parent_level, parent_idx) = slot.get(p).ok_or_else(|| {
                        Error::ShapeMismatch(format!(
                            "entry {i} refers to parent entry {p}, which must come earlier"
                        ))
                    })?;
                    if parent_level + 1 != level {
                        return Err(Error::ShapeMismatch(format!(
                            "entry {i} at level {level} has a parent at level {parent_level}"
                        )));
                    }
                    Some(parent_idx)
                }
            };
            if node.level > levels.len() {
                return Err(Error::ShapeMismatch(format!(
                    "entry {i} skips to level {}",
                    node.level
                )));
            }
            if node.level == levels.len() {
                levels.push(Vec::new());
            }
            slot.push((node.level, levels[node.level].len()));
            levels[node.level].push(TreeNode {
                agent: node.id,
                parent,
            });
        }
        let tree = WitnessTree::from_levels(levels, json.under_filled)?;
        if tree.root() != json.root {
            return Err(Error::ShapeMismatch(format!(
                "root is {} but the level-0 entry is {}",
                json.root,
                tree.root()
            )));
        }
        Ok(tree)
    }
}

impl Serialize for WitnessTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TreeJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WitnessTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let json = TreeJson::deserialize(d)?;
        WitnessTree::try_from(json).map_err(serde::de::Error::custom)
    }
}

/// A tree together with the answers needed to verify it, as accepted on
/// input: either a bare tree or `{theta?, tree, confirmations?}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeBundle {
    #[serde(default)]
    pub theta: Option<TPoPParams>,
    pub tree: WitnessTree,
    #[serde(default)]
    pub confirmations: Vec<Confirmation>,
}

impl TreeBundle {
    pub fn from_json(text: &str) -> Result<TreeBundle> {
        let malformed = |e: serde_json::Error| Error::MalformedTree(e.to_string());
        let value: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
        if value.get("tree").is_some() {
            serde_json::from_value(value).map_err(malformed)
        } else {
            Ok(TreeBundle {
                theta: None,
                tree: serde_json::from_value(value).map_err(malformed)?,
                confirmations: Vec::new(),
            })
        }
    }

    pub fn table(&self) -> ConfirmationTable {
        self.confirmations.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Chain-free oracle over an explicit adjacency list.
    struct Adjacency(HashMap<AgentId, Vec<AgentId>>);

    impl Adjacency {
        fn new(edges: &[(u32, &[u32])]) -> Self {
            Adjacency(
                edges
                    .iter()
                    .map(|(a, ns)| (AgentId(*a), ns.iter().map(|&n| AgentId(n)).collect()))
                    .collect(),
            )
        }
    }

    impl ConfirmationOracle for Adjacency {
        fn candidate_witnesses(&mut self, parent: AgentId, _: usize) -> Option<Vec<AgentId>> {
            self.0.get(&parent).cloned()
        }
        fn confirms(&self, _: AgentId, _: AgentId) -> bool {
            true
        }
    }

    #[test]
    fn flat_tree_with_plenty_of_neighbours() {
        let mut oracle = Adjacency::new(&[(0, &[1, 2, 3, 4, 5, 6, 7, 8])]);
        let tree = build_tree(AgentId(0), &TPoPParams::flat(), &mut oracle).unwrap();
        assert_eq!(tree.level_counts(), vec![1, 6]);
        assert_eq!(tree.len(), 7);
        assert!(!tree.under_filled());
        let named: Vec<u32> = tree.level(1).iter().map(|n| n.agent.0).collect();
        assert_eq!(named, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn deep_tree_skips_agents_already_named() {
        // 1 and 2 see each other and the prover; each still has two fresh agents.
        let mut oracle = Adjacency::new(&[
            (0, &[1, 2]),
            (1, &[0, 2, 3, 4]),
            (2, &[0, 1, 3, 5, 6]),
            (3, &[]),
            (4, &[]),
            (5, &[]),
            (6, &[]),
        ]);
        let tree = build_tree(AgentId(0), &TPoPParams::deep(), &mut oracle).unwrap();
        assert_eq!(tree.level_counts(), vec![1, 2, 4]);
        assert!(!tree.under_filled());
        let level2: Vec<(u32, usize)> = tree
            .level(2)
            .iter()
            .map(|n| (n.agent.0, n.parent.unwrap()))
            .collect();
        assert_eq!(level2, vec![(3, 0), (4, 0), (5, 1), (6, 1)]);
        let mut all: Vec<_> = tree.agents().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), tree.len());
    }

    #[test]
    fn isolated_prover_gives_under_filled_tree() {
        let mut oracle = Adjacency::new(&[(0, &[1]), (1, &[0, 2, 3])]);
        let tree = build_tree(AgentId(0), &TPoPParams::deep(), &mut oracle).unwrap();
        assert_eq!(tree.level_counts(), vec![1, 1, 2]);
        assert!(tree.under_filled());
    }

    #[test]
    fn unknown_prover_is_rejected() {
        let mut oracle = Adjacency::new(&[(0, &[1])]);
        let err = build_tree(AgentId(9), &TPoPParams::flat(), &mut oracle).unwrap_err();
        assert_eq!(err, Error::UnknownAgent(AgentId(9)));
    }

    #[test]
    fn json_shape() {
        let mut oracle = Adjacency::new(&[(0, &[1, 2]), (1, &[3, 4]), (2, &[5, 6])]);
        let tree = build_tree(AgentId(0), &TPoPParams::deep(), &mut oracle).unwrap();
        let json = serde_json::to_value(&tree).unwrap();
        assert_eq!(json["root"], 0);
        assert_eq!(json["nodes"][0]["parent"], serde_json::Value::Null);
        assert_eq!(json["nodes"][2]["parent"], 0);
        assert_eq!(json["nodes"][5]["id"], 5);
        assert_eq!(json["nodes"][5]["level"], 2);
        assert_eq!(json["nodes"][5]["parent"], 2);
        let back: WitnessTree = serde_json::from_value(json).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn json_rejects_bad_structure() {
        let bad = [
            // two roots
            r#"{"root":0,"nodes":[{"id":0,"level":0,"parent":null},{"id":1,"level":0,"parent":null}]}"#,
            // forward parent reference
            r#"{"root":0,"nodes":[{"id":0,"level":0,"parent":null},{"id":1,"level":1,"parent":2},{"id":2,"level":1,"parent":0}]}"#,
            // parent two levels up
            r#"{"root":0,"nodes":[{"id":0,"level":0,"parent":null},{"id":1,"level":1,"parent":0},{"id":2,"level":2,"parent":0}]}"#,
            // root id mismatch
            r#"{"root":7,"nodes":[{"id":0,"level":0,"parent":null}]}"#,
            // empty
            r#"{"root":0,"nodes":[]}"#,
        ];
        for text in bad {
            assert!(serde_json::from_str::<WitnessTree>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn table_oracle_names_listed_witnesses() {
        let mut table: ConfirmationTable = [
            Confirmation {
                witness: AgentId(1),
                parent: AgentId(0),
                confirms: true,
            },
            Confirmation {
                witness: AgentId(2),
                parent: AgentId(0),
                confirms: false,
            },
        ]
        .into_iter()
        .collect();
        assert_eq!(
            table.candidate_witnesses(AgentId(0), 2),
            Some(vec![AgentId(1), AgentId(2)])
        );
        assert_eq!(table.candidate_witnesses(AgentId(1), 2), Some(vec![]));
        assert_eq!(table.candidate_witnesses(AgentId(5), 2), None);
        assert!(table.confirms(AgentId(1), AgentId(0)));
        assert!(!table.confirms(AgentId(2), AgentId(0)));
        assert!(!table.confirms(AgentId(0), AgentId(1)));
    }

    #[test]
    fn bundles_accept_bare_trees_and_reject_garbage() {
        let bare = r#"{"root":0,"nodes":[{"id":0,"level":0,"parent":null},{"id":1,"level":1,"parent":0}]}"#;
        let b = TreeBundle::from_json(bare).unwrap();
        assert!(b.theta.is_none() && b.confirmations.is_empty());
        assert_eq!(b.tree.level_counts(), vec![1, 1]);

        let full = format!(
            r#"{{"theta":{{"threshold":1,"witnesses":[1]}},"tree":{bare},"confirmations":[{{"witness":1,"parent":0,"confirms":true}}]}}"#
        );
        let b = TreeBundle::from_json(&full).unwrap();
        assert_eq!(b.theta.as_ref().unwrap().witnesses(), &[1]);
        assert!(b.table().confirms(AgentId(1), AgentId(0)));

        for bad in [
            &bare[..bare.len() - 3],
            "[]",
            r#"{"tree":{"root":0,"nodes":[]}}"#,
        ] {
            assert!(
                matches!(TreeBundle::from_json(bad), Err(Error::MalformedTree(_))),
                "{bad}"
            );
        }
    }
}
