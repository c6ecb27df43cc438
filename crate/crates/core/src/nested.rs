//! Scenario trees and nested (conditional) risk.
//!
//! A tree with `T` stages has its root at stage 1 and leaves at stage `T + 1`.
//! Every inner node stores one or more candidate branching laws over its
//! children; a single candidate is the ordinary conditional law, several
//! candidates form a per-node (rectangular) ambiguity set.
//!
//! Nested evaluation runs backwards: each inner node at stage `t` receives the
//! stage-`t` risk of its children's values under its branching law, and the
//! value at the root is the nested risk of the leaf values.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{record_validation, Error, Result};
use crate::measures::{Categorical, FiniteDistribution};
use crate::risk::{evaluate, RiskSpec};

/// One risk functional per stage `1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StageRiskProfile(Vec<RiskSpec>);

impl StageRiskProfile {
    pub fn new(stages: Vec<RiskSpec>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidProfile("profile needs at least one stage".into()));
        }
        for s in &stages {
            s.validate()?;
        }
        Ok(StageRiskProfile(stages))
    }

    /// The same functional at each of `stages` stages.
    pub fn constant(risk: RiskSpec, stages: usize) -> Self {
        StageRiskProfile(vec![risk; stages.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Risk at stage `t` (1-based).
    pub fn stage(&self, t: usize) -> &RiskSpec {
        &self.0[t - 1]
    }

    pub fn specs(&self) -> &[RiskSpec] {
        &self.0
    }

    /// A one-entry profile is broadcast to `stages` stages; otherwise the
    /// length must match.
    pub fn fit(&self, stages: usize) -> Result<Self> {
        match self.0.len() {
            1 => Ok(Self::constant(self.0[0], stages)),
            n if n == stages => Ok(self.clone()),
            n => Err(Error::InvalidProfile(format!(
                "profile has {n} stages, model has {stages}"
            ))),
        }
    }
}

/// Comma separated list such as `avar:0.1,expectation`.
impl FromStr for StageRiskProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let specs = s
            .split(',')
            .map(|p| p.parse::<RiskSpec>())
            .collect::<Result<Vec<_>>>()?;
        StageRiskProfile::new(specs)
    }
}

impl fmt::Display for StageRiskProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub stage: usize,
    #[serde(default)]
    pub parent: Option<usize>,
    #[serde(default)]
    pub children: Vec<usize>,
    #[serde(default)]
    pub candidates: Vec<Categorical>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct ScenarioTree {
    stages: usize,
    nodes: Vec<TreeNode>,
    leaf_values: BTreeMap<usize, f64>,
    #[serde(skip)]
    position: HashMap<usize, usize>,
    #[serde(skip)]
    root: usize,
    // node positions, deepest stage first
    #[serde(skip)]
    backward_order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    stages: usize,
    nodes: Vec<TreeNode>,
    leaf_values: BTreeMap<usize, f64>,
}

impl TryFrom<RawTree> for ScenarioTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        record_validation(ScenarioTree::new(raw.stages, raw.nodes, raw.leaf_values))
    }
}

impl From<ScenarioTree> for RawTree {
    fn from(t: ScenarioTree) -> Self {
        RawTree {
            stages: t.stages,
            nodes: t.nodes,
            leaf_values: t.leaf_values,
        }
    }
}

/// Node values after a backward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedReport {
    pub value: f64,
    pub node_values: BTreeMap<usize, f64>,
    /// Candidate attaining the stage risk at each inner node (smallest index on ties).
    pub worst_member: BTreeMap<usize, usize>,
    /// Nodes reached with probability zero under every candidate on their path.
    /// Their values are computed all the same.
    pub off_support: Vec<usize>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidTree(msg.into())
}

impl ScenarioTree {
    pub fn new(
        stages: usize,
        nodes: Vec<TreeNode>,
        leaf_values: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        if stages == 0 {
            return Err(invalid("a tree needs at least one stage"));
        }
        if nodes.is_empty() {
            return Err(invalid("no nodes"));
        }
        let mut position = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if position.insert(n.id, i).is_some() {
                return Err(invalid(format!("duplicate node id {}", n.id)));
            }
        }
        let roots: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].parent.is_none())
            .collect();
        if roots.len() != 1 {
            return Err(invalid(format!("expected one root, found {}", roots.len())));
        }
        let root = roots[0];
        if nodes[root].stage != 1 {
            return Err(invalid("root must sit at stage 1"));
        }
        for n in &nodes {
            if let Some(p) = n.parent {
                let &pi = position
                    .get(&p)
                    .ok_or_else(|| invalid(format!("node {} has unknown parent {p}", n.id)))?;
                if !nodes[pi].children.contains(&n.id) {
                    return Err(invalid(format!("node {p} does not list child {}", n.id)));
                }
                if n.stage != nodes[pi].stage + 1 {
                    return Err(invalid(format!("node {} skips a stage", n.id)));
                }
            }
            for c in &n.children {
                let &ci = position
                    .get(c)
                    .ok_or_else(|| invalid(format!("node {} lists unknown child {c}", n.id)))?;
                if nodes[ci].parent != Some(n.id) {
                    return Err(invalid(format!("child {c} does not point back to {}", n.id)));
                }
            }
            if n.is_leaf() {
                if n.stage != stages + 1 {
                    return Err(invalid(format!(
                        "leaf {} at stage {}, leaves belong to stage {}",
                        n.id,
                        n.stage,
                        stages + 1
                    )));
                }
                let v = leaf_values
                    .get(&n.id)
                    .ok_or_else(|| invalid(format!("leaf {} has no value", n.id)))?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        what: "leaf value",
                    });
                }
            } else {
                if n.stage > stages {
                    return Err(invalid(format!("inner node {} below the last stage", n.id)));
                }
                if n.candidates.is_empty() {
                    return Err(invalid(format!("node {} has no branching law", n.id)));
                }
                let mut seen = std::collections::HashSet::new();
                if !n.children.iter().all(|c| seen.insert(*c)) {
                    return Err(invalid(format!("node {} repeats a child", n.id)));
                }
                for cand in &n.candidates {
                    if cand.len() != n.children.len() {
                        return Err(Error::LengthMismatch {
                            what: "branching law over children",
                            expected: n.children.len(),
                            got: cand.len(),
                        });
                    }
                }
            }
        }
        for id in leaf_values.keys() {
            match position.get(id) {
                Some(&i) if nodes[i].is_leaf() => {}
                _ => return Err(invalid(format!("leaf value given for non-leaf {id}"))),
            }
        }
        // reachability: every node hangs off the root
        let mut reached = 0;
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            reached += 1;
            stack.extend(nodes[i].children.iter().map(|c| position[c]));
        }
        if reached != nodes.len() {
            return Err(invalid("some nodes are not connected to the root"));
        }
        let mut backward_order: Vec<usize> = (0..nodes.len()).collect();
        backward_order.sort_by(|a, b| nodes[*b].stage.cmp(&nodes[*a].stage).then(a.cmp(b)));
        Ok(ScenarioTree {
            stages,
            nodes,
            leaf_values,
            position,
            root,
            backward_order,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root_id(&self) -> usize {
        self.nodes[self.root].id
    }

    pub fn leaf_values(&self) -> &BTreeMap<usize, f64> {
        &self.leaf_values
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode> {
        self.position
            .get(&id)
            .map(|&i| &self.nodes[i])
            .ok_or(Error::UnknownNode { node: id })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_values.len()
    }

    /// Stage risk of the children's values at `node_id` under candidate `member`.
    pub fn conditional_risk_at_node(
        &self,
        node_id: usize,
        risk: &RiskSpec,
        member: usize,
        values: &BTreeMap<usize, f64>,
    ) -> Result<f64> {
        let node = self.node(node_id)?;
        if node.is_leaf() {
            return Err(Error::LeafNode { node: node_id });
        }
        let law = node.candidates.get(member).ok_or(Error::MemberOutOfRange {
            node: node_id,
            member,
            count: node.candidates.len(),
        })?;
        let child_values = node
            .children
            .iter()
            .map(|c| {
                values
                    .get(c)
                    .copied()
                    .ok_or(Error::ChildValueMissing { child: *c })
            })
            .collect::<Result<Vec<f64>>>()?;
        evaluate(risk, &law.law_of(&child_values)?)
    }

    fn check_profile(&self, profile: &StageRiskProfile) -> Result<()> {
        if profile.len() != self.stages {
            return Err(Error::InvalidProfile(format!(
                "profile has {} stages, tree has {}",
                profile.len(),
                self.stages
            )));
        }
        Ok(())
    }

    // Backward pass; `pick` chooses which candidates a node maximizes over.
    fn backward(
        &self,
        profile: &StageRiskProfile,
        mut pick: impl FnMut(&TreeNode) -> Result<std::ops::Range<usize>>,
    ) -> Result<NestedReport> {
        self.check_profile(profile)?;
        let mut node_values = BTreeMap::new();
        let mut worst_member = BTreeMap::new();
        for &i in &self.backward_order {
            let node = &self.nodes[i];
            if node.is_leaf() {
                node_values.insert(node.id, self.leaf_values[&node.id]);
                continue;
            }
            let risk = profile.stage(node.stage);
            let mut best: Option<(f64, usize)> = None;
            for m in pick(node)? {
                let v = self.conditional_risk_at_node(node.id, risk, m, &node_values)?;
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, m));
                }
            }
            let (v, m) = best.expect("candidate range is nonempty");
            node_values.insert(node.id, v);
            worst_member.insert(node.id, m);
        }
        Ok(NestedReport {
            value: node_values[&self.root_id()],
            node_values,
            worst_member,
            off_support: self.off_support_nodes(),
        })
    }

    /// Nested risk of the leaf values. Every inner node must carry exactly
    /// one branching law.
    pub fn nested_evaluate(&self, profile: &StageRiskProfile) -> Result<f64> {
        Ok(self.nested_report(profile)?.value)
    }

    pub fn nested_report(&self, profile: &StageRiskProfile) -> Result<NestedReport> {
        self.backward(profile, |n| {
            if n.candidates.len() == 1 {
                Ok(0..1)
            } else {
                Err(Error::AmbiguousCandidates {
                    node: n.id,
                    count: n.candidates.len(),
                })
            }
        })
    }

    /// Nested risk with the worst candidate taken at each node.
    pub fn robust_nested_evaluate(&self, profile: &StageRiskProfile) -> Result<f64> {
        Ok(self.robust_nested_report(profile)?.value)
    }

    pub fn robust_nested_report(&self, profile: &StageRiskProfile) -> Result<NestedReport> {
        self.backward(profile, |n| Ok(0..n.candidates.len()))
    }

    /// Nested risk with a fixed candidate per inner node.
    pub fn nested_evaluate_with_members(
        &self,
        profile: &StageRiskProfile,
        members: &BTreeMap<usize, usize>,
    ) -> Result<f64> {
        Ok(self
            .backward(profile, |n| {
                let m = members.get(&n.id).copied().unwrap_or(0);
                if m >= n.candidates.len() {
                    return Err(Error::MemberOutOfRange {
                        node: n.id,
                        member: m,
                        count: n.candidates.len(),
                    });
                }
                Ok(m..m + 1)
            })?
            .value)
    }

    /// A copy with every leaf value replaced by `f(id, value)`.
    pub fn map_leaves(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let leaf_values = self.leaf_values.iter().map(|(&k, &v)| (k, f(k, v))).collect();
        ScenarioTree::new(self.stages, self.nodes.clone(), leaf_values)
    }

    fn off_support_nodes(&self) -> Vec<usize> {
        let mut off = vec![false; self.nodes.len()];
        let mut order = self.backward_order.clone();
        order.reverse();
        for &i in &order {
            let node = &self.nodes[i];
            for (k, c) in node.children.iter().enumerate() {
                let ci = self.position[c];
                let unreachable = node.candidates.iter().all(|law| law.probs()[k] == 0.0);
                off[ci] = off[i] || unreachable;
            }
        }
        let mut ids: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| off[i])
            .map(|i| self.nodes[i].id)
            .collect();
        ids.sort_unstable();
        ids
    }
}

/// Number of root-to-leaf paths of a product tree.
fn path_count(marginals: &[FiniteDistribution]) -> usize {
    marginals.iter().map(|m| m.len()).product()
}

/// Rectangular tree: every stage-`t` node branches with the law `marginals[t-1]`.
///
/// `leaf_table` lists the leaf values for all atom-index paths in row-major
/// order (the first stage varies slowest). Node ids are assigned breadth first
/// starting from the root at 0.
pub fn build_product_tree(
    marginals: &[FiniteDistribution],
    leaf_table: &[f64],
) -> Result<ScenarioTree> {
    if marginals.is_empty() {
        return Err(invalid("product tree needs at least one marginal"));
    }
    let expected = path_count(marginals);
    if leaf_table.len() != expected {
        return Err(Error::PathTableIncomplete {
            expected,
            got: leaf_table.len(),
        });
    }
    let stages = marginals.len();
    let mut nodes = vec![TreeNode {
        id: 0,
        stage: 1,
        parent: None,
        children: vec![],
        candidates: vec![],
    }];
    let mut frontier = vec![0usize];
    for (t, marginal) in marginals.iter().enumerate() {
        let law = Categorical::new(marginal.probs().to_vec())?;
        let mut next = Vec::with_capacity(frontier.len() * marginal.len());
        for &parent in &frontier {
            let mut children = Vec::with_capacity(marginal.len());
            for _ in 0..marginal.len() {
                let id = nodes.len();
                nodes.push(TreeNode {
                    id,
                    stage: t + 2,
                    parent: Some(parent),
                    children: vec![],
                    candidates: vec![],
                });
                children.push(id);
                next.push(id);
            }
            nodes[parent].children = children;
            nodes[parent].candidates = vec![law.clone()];
        }
        frontier = next;
    }
    // breadth-first numbering makes the last frontier row-major in paths
    let leaf_values = frontier
        .iter()
        .zip(leaf_table)
        .map(|(&id, &v)| (id, v))
        .collect();
    ScenarioTree::new(stages, nodes, leaf_values)
}

/// Product tree whose leaf values are `f(atoms along the path)`.
pub fn product_tree_from_fn(
    marginals: &[FiniteDistribution],
    f: impl Fn(&[f64]) -> f64,
) -> Result<ScenarioTree> {
    let table = product_paths(marginals)
        .iter()
        .map(|path| f(path))
        .collect::<Vec<_>>();
    build_product_tree(marginals, &table)
}

/// Atom paths in row-major order.
pub fn product_paths(marginals: &[FiniteDistribution]) -> Vec<Vec<f64>> {
    let mut paths: Vec<Vec<f64>> = vec![vec![]];
    for m in marginals {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                m.atoms().iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    paths
}

/// Nested risk on a product space computed stagewise on the flat path table,
/// without building the tree.
pub fn product_nested_evaluate(
    marginals: &[FiniteDistribution],
    leaf_table: &[f64],
    profile: &StageRiskProfile,
) -> Result<f64> {
    let expected = path_count(marginals);
    if leaf_table.len() != expected {
        return Err(Error::PathTableIncomplete {
            expected,
            got: leaf_table.len(),
        });
    }
    if profile.len() != marginals.len() {
        return Err(Error::InvalidProfile(format!(
            "profile has {} stages, product has {}",
            profile.len(),
            marginals.len()
        )));
    }
    let mut table = leaf_table.to_vec();
    for (t, marginal) in marginals.iter().enumerate().rev() {
        let width = marginal.len();
        let law = Categorical::new(marginal.probs().to_vec())?;
        table = table
            .chunks(width)
            .map(|row| evaluate(profile.stage(t + 1), &law.law_of(row)?))
            .collect::<Result<Vec<f64>>>()?;
    }
    Ok(table[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(p: &[f64]) -> Categorical {
        Categorical::new(p.to_vec()).unwrap()
    }

    /// Root with two children, each with two leaves; all branches 1/2.
    fn binary_two_stage(leaves: [f64; 4]) -> ScenarioTree {
        let half = cat(&[0.5, 0.5]);
        let nodes = vec![
            TreeNode { id: 0, stage: 1, parent: None, children: vec![1, 2], candidates: vec![half.clone()] },
            TreeNode { id: 1, stage: 2, parent: Some(0), children: vec![3, 4], candidates: vec![half.clone()] },
            TreeNode { id: 2, stage: 2, parent: Some(0), children: vec![5, 6], candidates: vec![half] },
            TreeNode { id: 3, stage: 3, parent: Some(1), children: vec![], candidates: vec![] },
            TreeNode { id: 4, stage: 3, parent: Some(1), children: vec![], candidates: vec![] },
            TreeNode { id: 5, stage: 3, parent: Some(2), children: vec![], candidates: vec![] },
            TreeNode { id: 6, stage: 3, parent: Some(2), children: vec![], candidates: vec![] },
        ];
        let leaf_values = [3, 4, 5, 6].iter().zip(leaves).map(|(&i, v)| (i, v)).collect();
        ScenarioTree::new(2, nodes, leaf_values).unwrap()
    }

    fn depth_one(candidates: Vec<Categorical>, leaves: &[f64]) -> ScenarioTree {
        let children: Vec<usize> = (1..=leaves.len()).collect();
        let mut nodes = vec![TreeNode {
            id: 0,
            stage: 1,
            parent: None,
            children: children.clone(),
            candidates,
        }];
        for &c in &children {
            nodes.push(TreeNode { id: c, stage: 2, parent: Some(0), children: vec![], candidates: vec![] });
        }
        let leaf_values = children.iter().zip(leaves).map(|(&c, &v)| (c, v)).collect();
        ScenarioTree::new(1, nodes, leaf_values).unwrap()
    }

    #[test]
    fn conditional_risk_examples() {
        let tree = depth_one(vec![cat(&[0.5, 0.5])], &[0.0, 10.0]);
        let values: BTreeMap<usize, f64> = [(1, 0.0), (2, 10.0)].into_iter().collect();
        assert_eq!(
            tree.conditional_risk_at_node(0, &RiskSpec::Expectation, 0, &values).unwrap(),
            5.0
        );
        assert_eq!(
            tree.conditional_risk_at_node(0, &RiskSpec::VaR { alpha: 0.4 }, 0, &values).unwrap(),
            10.0
        );
        let single = depth_one(vec![cat(&[1.0])], &[7.5]);
        let values: BTreeMap<usize, f64> = [(1, 7.5)].into_iter().collect();
        assert_eq!(
            single
                .conditional_risk_at_node(0, &RiskSpec::AVaR { alpha: 0.1 }, 0, &values)
                .unwrap(),
            7.5
        );
    }

    #[test]
    fn conditional_risk_errors() {
        let tree = depth_one(vec![cat(&[0.5, 0.5])], &[0.0, 10.0]);
        let empty = BTreeMap::new();
        assert_eq!(
            tree.conditional_risk_at_node(1, &RiskSpec::Expectation, 0, &empty),
            Err(Error::LeafNode { node: 1 })
        );
        assert!(matches!(
            tree.conditional_risk_at_node(0, &RiskSpec::Expectation, 3, &empty),
            Err(Error::MemberOutOfRange { .. })
        ));
        assert_eq!(
            tree.conditional_risk_at_node(0, &RiskSpec::Expectation, 0, &empty),
            Err(Error::ChildValueMissing { child: 1 })
        );
    }

    #[test]
    fn nested_examples() {
        let tree = binary_two_stage([1.0, 2.0, 3.0, 4.0]);
        let e = StageRiskProfile::constant(RiskSpec::Expectation, 2);
        assert_eq!(tree.nested_evaluate(&e).unwrap(), 2.5);

        let flat = binary_two_stage([4.25; 4]);
        let mixed = StageRiskProfile::new(vec![
            RiskSpec::VaR { alpha: 0.3 },
            RiskSpec::Entropic { tau: 2.0 },
        ])
        .unwrap();
        assert!((flat.nested_evaluate(&mixed).unwrap() - 4.25).abs() < 1e-12);

        let one = depth_one(vec![cat(&[0.2, 0.3, 0.5])], &[3.0, 1.0, 2.0]);
        let risk = RiskSpec::AVaR { alpha: 0.4 };
        let direct = crate::risk::evaluate(
            &risk,
            &FiniteDistribution::new(vec![3.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(
            one.nested_evaluate(&StageRiskProfile::constant(risk, 1)).unwrap(),
            direct
        );
    }

    #[test]
    fn robust_examples() {
        let tree = depth_one(vec![cat(&[0.9, 0.1]), cat(&[0.5, 0.5])], &[0.0, 10.0]);
        let e = StageRiskProfile::constant(RiskSpec::Expectation, 1);
        assert!((tree.robust_nested_evaluate(&e).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(
            tree.nested_evaluate(&e),
            Err(Error::AmbiguousCandidates { node: 0, count: 2 })
        );
        let report = tree.robust_nested_report(&e).unwrap();
        assert_eq!(report.worst_member[&0], 1);

        let plain = binary_two_stage([1.0, 2.0, 3.0, 4.0]);
        let p = StageRiskProfile::constant(RiskSpec::VaR { alpha: 0.4 }, 2);
        assert_eq!(
            plain.robust_nested_evaluate(&p).unwrap(),
            plain.nested_evaluate(&p).unwrap()
        );
    }

    #[test]
    fn product_tree_examples() {
        let pm = FiniteDistribution::uniform(&[-1.0, 1.0]).unwrap();
        let t1 = product_tree_from_fn(std::slice::from_ref(&pm), |p| p[0]).unwrap();
        assert_eq!(t1.leaf_count(), 2);
        assert_eq!(t1.stages(), 1);

        let t2 = product_tree_from_fn(&[pm.clone(), pm.clone()], |p| p.iter().sum()).unwrap();
        assert_eq!(t2.leaf_count(), 4);
        let e = StageRiskProfile::constant(RiskSpec::Expectation, 2);
        assert_eq!(t2.nested_evaluate(&e).unwrap(), 0.0);

        let t3 = product_tree_from_fn(&[pm.clone(), pm.clone(), pm.clone()], |p| p[2]).unwrap();
        assert_eq!(t3.leaf_count(), 8);
        let stage2: Vec<&TreeNode> = t3.nodes().iter().filter(|n| n.stage == 2).collect();
        assert_eq!(stage2.len(), 2);
        assert!(stage2.iter().all(|n| n.candidates == stage2[0].candidates));

        assert_eq!(
            build_product_tree(&[pm.clone(), pm], &[1.0, 2.0, 3.0]).unwrap_err(),
            Error::PathTableIncomplete { expected: 4, got: 3 }
        );
    }

    #[test]
    fn stagewise_product_evaluation_matches_tree() {
        let a = FiniteDistribution::new(vec![0.0, 1.0, 5.0], vec![0.2, 0.5, 0.3]).unwrap();
        let b = FiniteDistribution::new(vec![-2.0, 2.0], vec![0.7, 0.3]).unwrap();
        let table: Vec<f64> = (0..6).map(|i| (i * i) as f64 - 3.0).collect();
        let profile =
            StageRiskProfile::new(vec![RiskSpec::AVaR { alpha: 0.3 }, RiskSpec::VaR { alpha: 0.2 }])
                .unwrap();
        let tree = build_product_tree(&[a.clone(), b.clone()], &table).unwrap();
        let via_tree = tree.nested_evaluate(&profile).unwrap();
        let stagewise = product_nested_evaluate(&[a, b], &table, &profile).unwrap();
        assert!((via_tree - stagewise).abs() < 1e-12);
    }

    #[test]
    fn invalid_trees_are_rejected() {
        let half = cat(&[0.5, 0.5]);
        // leaf at the wrong stage
        let nodes = vec![
            TreeNode { id: 0, stage: 1, parent: None, children: vec![1, 2], candidates: vec![half.clone()] },
            TreeNode { id: 1, stage: 2, parent: Some(0), children: vec![], candidates: vec![] },
            TreeNode { id: 2, stage: 2, parent: Some(0), children: vec![], candidates: vec![] },
        ];
        let leaves: BTreeMap<usize, f64> = [(1, 0.0), (2, 1.0)].into_iter().collect();
        assert!(ScenarioTree::new(2, nodes.clone(), leaves.clone()).is_err());
        assert!(ScenarioTree::new(1, nodes.clone(), leaves.clone()).is_ok());
        // missing leaf value
        let partial: BTreeMap<usize, f64> = [(1, 0.0)].into_iter().collect();
        assert!(ScenarioTree::new(1, nodes.clone(), partial).is_err());
        // branching law of wrong arity
        let mut bad = nodes.clone();
        bad[0].candidates = vec![cat(&[1.0])];
        assert!(matches!(
            ScenarioTree::new(1, bad, leaves.clone()),
            Err(Error::LengthMismatch { .. })
        ));
        // broken back link
        let mut bad = nodes;
        bad[2].parent = Some(1);
        assert!(ScenarioTree::new(1, bad, leaves).is_err());
    }

    #[test]
    fn off_support_nodes_are_flagged_but_valued() {
        let tree = depth_one(vec![cat(&[1.0, 0.0])], &[2.0, 50.0]);
        let report = tree
            .nested_report(&StageRiskProfile::constant(RiskSpec::Expectation, 1))
            .unwrap();
        assert_eq!(report.off_support, vec![2]);
        assert_eq!(report.node_values[&2], 50.0);
        assert_eq!(report.value, 2.0);
    }

    #[test]
    fn tree_json_round_trip() {
        let json = r#"{"stages":1,"nodes":[
            {"id":0,"stage":1,"parent":null,"children":[1,2],"candidates":[{"probs":[0.5,0.5]}]},
            {"id":1,"stage":2,"parent":0,"children":[],"candidates":[]},
            {"id":2,"stage":2,"parent":0,"children":[],"candidates":[]}],
            "leaf_values":{"1":0.0,"2":10.0}}"#;
        let tree: ScenarioTree = serde_json::from_str(json).unwrap();
        let e = StageRiskProfile::constant(RiskSpec::Expectation, 1);
        assert_eq!(tree.nested_evaluate(&e).unwrap(), 5.0);
        let back: ScenarioTree =
            serde_json::from_str(&serde_json::to_string(&tree).unwrap()).unwrap();
        assert_eq!(back.nested_evaluate(&e).unwrap(), 5.0);
    }

    #[test]
    fn profile_parsing_and_fit() {
        let p: StageRiskProfile = "avar:0.1,expectation".parse().unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.to_string(), "avar:0.1,expectation");
        assert_eq!(p.fit(2).unwrap(), p);
        assert!(p.fit(3).is_err());
        let one: StageRiskProfile = "var:0.2".parse().unwrap();
        assert_eq!(one.fit(3).unwrap().len(), 3);
    }
}
