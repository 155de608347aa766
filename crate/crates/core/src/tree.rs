//! Binary classification tree over normalized design coordinates, grown
//! greedily by Gini impurity.
//!
//! Conventions: thresholds sit halfway between adjacent distinct values, a
//! coordinate `< threshold` goes left and `>= threshold` goes right, and a
//! leaf with equal class counts is labelled swirl.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design::{DesignSpace, NormalizedDesign};
use crate::error::{Error, Result};
use crate::oracle::FlowClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDesign {
    pub design: NormalizedDesign,
    pub label: FlowClass,
}

/// `p_j (1 - p_j) + p_s (1 - p_s)`.
pub fn gini_impurity(n_jet: usize, n_swirl: usize) -> Result<f64> {
    let n = n_jet + n_swirl;
    if n == 0 {
        return Err(Error::EmptyNode);
    }
    let pj = n_jet as f64 / n as f64;
    let ps = n_swirl as f64 / n as f64;
    Ok(pj * (1.0 - pj) + ps * (1.0 - ps))
}

fn counts<'a>(data: impl IntoIterator<Item = &'a LabeledDesign>) -> (usize, usize) {
    data.into_iter().fold((0, 0), |(j, s), d| match d.label {
        FlowClass::Jet => (j + 1, s),
        FlowClass::Swirl => (j, s + 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Count-weighted mean Gini impurity of the two children.
    pub impurity: f64,
}

/// Exhaustive search over features and midpoints; see [`best_split_with`].
pub fn best_split(data: &[LabeledDesign]) -> Result<Split> {
    best_split_with(data, 1)
}

/// Best split whose children both hold at least `min_leaf` samples. Ties go to
/// the lowest feature index, then the lowest threshold.
pub fn best_split_with(data: &[LabeledDesign], min_leaf: usize) -> Result<Split> {
    let (nj, ns) = counts(data);
    if data.len() < 2 || nj == 0 || ns == 0 {
        return Err(Error::NoSplit("need at least two samples from both classes".into()));
    }
    let p = data[0].design.dim();
    let n = data.len();
    let min_leaf = min_leaf.max(1);
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for feature in 0..p {
        let coord = |i: usize| data[i].design.coords()[feature];
        order.sort_by(|&a, &b| coord(a).total_cmp(&coord(b)));
        let (mut lj, mut ls) = (0usize, 0usize);
        for w in 0..n - 1 {
            match data[order[w]].label {
                FlowClass::Jet => lj += 1,
                FlowClass::Swirl => ls += 1,
            }
            let (lo, hi) = (coord(order[w]), coord(order[w + 1]));
            if lo == hi {
                continue;
            }
            let left = w + 1;
            if left < min_leaf || n - left < min_leaf {
                continue;
            }
            let gl = gini_impurity(lj, ls)?;
            let gr = gini_impurity(nj - lj, ns - ls)?;
            let impurity = (left as f64 * gl + (n - left) as f64 * gr) / n as f64;
            if best.is_none_or(|b| impurity < b.impurity) {
                best = Some(Split { feature, threshold: 0.5 * (lo + hi), impurity });
            }
        }
    }
    best.ok_or_else(|| Error::NoSplit("no admissible threshold".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        label: FlowClass,
        /// `[jet, swirl]` training counts.
        counts: [usize; 2],
    },
}

impl TreeNode {
    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn proportions(counts: [usize; 2]) -> [f64; 2] {
        let n = (counts[0] + counts[1]).max(1) as f64;
        [counts[0] as f64 / n, counts[1] as f64 / n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 4, min_leaf: 2 }
    }
}

fn majority(jet: usize, swirl: usize) -> FlowClass {
    if jet > swirl {
        FlowClass::Jet
    } else {
        FlowClass::Swirl
    }
}

pub fn fit_tree(data: &[LabeledDesign], cfg: TreeConfig) -> TreeNode {
    grow(data.to_vec(), cfg, 0)
}

fn grow(data: Vec<LabeledDesign>, cfg: TreeConfig, depth: usize) -> TreeNode {
    let (nj, ns) = counts(&data);
    let leaf = TreeNode::Leaf { label: majority(nj, ns), counts: [nj, ns] };
    if nj == 0 || ns == 0 || depth >= cfg.max_depth {
        return leaf;
    }
    let parent = gini_impurity(nj, ns).expect("nonempty node");
    let split = match best_split_with(&data, cfg.min_leaf) {
        Ok(s) if s.impurity < parent => s,
        _ => return leaf,
    };
    let (left, right): (Vec<_>, Vec<_>) =
        data.into_iter().partition(|d| d.design.coords()[split.feature] < split.threshold);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(left, cfg, depth + 1)),
        right: Box::new(grow(right, cfg, depth + 1)),
    }
}

pub fn classify(tree: &TreeNode, d: &NormalizedDesign) -> FlowClass {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf { label, .. } => return *label,
            TreeNode::Internal { feature, threshold, left, right } => {
                node = if d.coords()[*feature] < *threshold { left } else { right };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub param: String,
    pub unit: String,
    /// Inclusive lower bound (`>=`), if any.
    pub at_least: Option<f64>,
    /// Exclusive upper bound (`<`), if any.
    pub below: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub constraints: Vec<Constraint>,
    pub label: FlowClass,
    pub counts: [usize; 2],
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        for c in &self.constraints {
            if let Some(v) = c.at_least {
                parts.push(format!("{} >= {v:.2} {}", c.param, c.unit));
            }
            if let Some(v) = c.below {
                parts.push(format!("{} < {v:.2} {}", c.param, c.unit));
            }
        }
        let cond = if parts.is_empty() { "always".to_string() } else { parts.join(" and ") };
        write!(f, "{cond} -> {} (jet {}, swirl {})", self.label, self.counts[0], self.counts[1])
    }
}

/// One rule per leaf, thresholds mapped back to physical units.
pub fn extract_rules(tree: &TreeNode, space: &DesignSpace) -> Vec<Rule> {
    let p = space.dim();
    let mut rules = Vec::new();
    let mut bounds = vec![(None, None); p];
    walk(tree, space, &mut bounds, &mut rules);
    rules
}

fn walk(node: &TreeNode, space: &DesignSpace, bounds: &mut Vec<(Option<f64>, Option<f64>)>, out: &mut Vec<Rule>) {
    match node {
        TreeNode::Leaf { label, counts } => {
            let constraints = bounds
                .iter()
                .enumerate()
                .filter(|(_, b)| b.0.is_some() || b.1.is_some())
                .map(|(k, &(lo, hi))| {
                    let par = &space.params()[k];
                    let phys = |u: f64| par.lo + u * par.span();
                    Constraint { param: par.name.clone(), unit: par.unit.clone(), at_least: lo.map(phys), below: hi.map(phys) }
                })
                .collect();
            out.push(Rule { constraints, label: *label, counts: *counts });
        }
        TreeNode::Internal { feature, threshold, left, right } => {
            let saved = bounds[*feature];
            bounds[*feature].1 = Some(saved.1.map_or(*threshold, |b: f64| b.min(*threshold)));
            walk(left, space, bounds, out);
            bounds[*feature] = saved;
            bounds[*feature].0 = Some(saved.0.map_or(*threshold, |b: f64| b.max(*threshold)));
            walk(right, space, bounds, out);
            bounds[*feature] = saved;
        }
    }
}

pub fn rules_text(rules: &[Rule]) -> String {
    let mut s = String::new();
    for (i, r) in rules.iter().enumerate() {
        let _ = writeln!(s, "rule {}: {r}", i + 1);
    }
    s
}
