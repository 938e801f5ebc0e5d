//! CART classification tree with Gini impurity.

use super::{FeatureVector, LabeledSample, WordLabel, WordModelError, CLASS_COUNT, FEATURE_COUNT};

/// Impurity differences below this count as ties.
const GINI_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Samples with `features[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: WordLabel,
        counts: [u32; CLASS_COUNT],
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: WordLabel,
    /// Fraction of the leaf's training samples carrying `label`.
    pub confidence: f64,
}

/// Immutable trained tree. Nodes are stored in preorder with the root at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    nodes: Vec<Node>,
    params: TreeParams,
}

/// `1 - Σ p_k²` over the class proportions; 0 for an empty node.
pub fn gini(counts: &[u32; CLASS_COUNT]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = f64::from(n);
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = f64::from(c) / n;
            p * p
        })
        .sum::<f64>()
}

fn majority(counts: &[u32; CLASS_COUNT]) -> WordLabel {
    let mut best = 0;
    for k in 1..CLASS_COUNT {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    WordLabel::ALL[best]
}

impl DecisionTreeModel {
    /// Builds a model from preorder nodes, checking that they form one
    /// well-formed binary tree rooted at index 0.
    pub fn from_nodes(nodes: Vec<Node>, params: TreeParams) -> Result<Self, WordModelError> {
        let bad = |why: String| WordModelError::MalformedModel(why);
        if nodes.is_empty() {
            return Err(bad("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(bad(format!("node {i} reached twice")));
            }
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = nodes[i]
            {
                if feature >= FEATURE_COUNT {
                    return Err(bad(format!("node {i}: feature index {feature} out of range")));
                }
                if !threshold.is_finite() {
                    return Err(bad(format!("node {i}: non-finite threshold")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() {
                        return Err(bad(format!("node {i}: bad child index {child}")));
                    }
                    stack.push(child);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(bad(format!("node {orphan} unreachable from the root")));
        }
        Ok(DecisionTreeModel { nodes, params })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, features: &FeatureVector) -> Prediction {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    // NaN compares false and falls right
                    i = if features.0[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { label, counts } => {
                    let total: u32 = counts.iter().sum();
                    let confidence = if total == 0 {
                        0.0
                    } else {
                        f64::from(counts[label.index()]) / f64::from(total)
                    };
                    return Prediction {
                        label: *label,
                        confidence,
                    };
                }
            }
        }
    }

    /// Fraction of `samples` whose label the tree reproduces.
    pub fn accuracy(&self, samples: &[LabeledSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples
            .iter()
            .filter(|s| self.predict(&s.features).label == s.label)
            .count();
        hits as f64 / samples.len() as f64
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    weighted_gini: f64,
}

fn class_counts(samples: &[LabeledSample], idx: &[usize]) -> [u32; CLASS_COUNT] {
    let mut counts = [0u32; CLASS_COUNT];
    for &i in idx {
        counts[samples[i].label.index()] += 1;
    }
    counts
}

/// Best (feature, threshold) by weighted child Gini. Thresholds are
/// midpoints between consecutive distinct values; ties go to the lowest
/// feature index, then the lowest threshold.
fn best_split(samples: &[LabeledSample], idx: &[usize], min_leaf: usize) -> Option<Candidate> {
    let n = idx.len();
    let total = class_counts(samples, idx);
    let mut best: Option<Candidate> = None;
    let mut order = idx.to_vec();

    for feature in 0..FEATURE_COUNT {
        order.sort_by(|&a, &b| samples[a].features.0[feature].total_cmp(&samples[b].features.0[feature]));
        let mut left = [0u32; CLASS_COUNT];
        for pos in 0..n - 1 {
            left[samples[order[pos]].label.index()] += 1;
            let lo = samples[order[pos]].features.0[feature];
            let hi = samples[order[pos + 1]].features.0[feature];
            let n_left = pos + 1;
            let n_right = n - n_left;
            if lo >= hi || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let mut right = total;
            for k in 0..CLASS_COUNT {
                right[k] -= left[k];
            }
            let weighted = (n_left as f64 * gini(&left) + n_right as f64 * gini(&right)) / n as f64;
            let improves = best.as_ref().is_none_or(|b| weighted < b.weighted_gini - GINI_EPS);
            if improves {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    weighted_gini: weighted,
                });
            }
        }
    }
    best
}

/// Greedy top-down CART. A node becomes a leaf when it is pure, sits at
/// `max_depth`, cannot give both children `min_leaf` samples, or no split
/// lowers its impurity.
pub fn train(samples: &[LabeledSample], params: TreeParams) -> Result<DecisionTreeModel, WordModelError> {
    if samples.len() < 2 {
        return Err(WordModelError::EmptyDataset(samples.len()));
    }
    let params = TreeParams {
        min_leaf: params.min_leaf.max(1),
        ..params
    };
    let mut nodes = Vec::new();
    let idx: Vec<usize> = (0..samples.len()).collect();
    grow(samples, idx, 0, params, &mut nodes);
    Ok(DecisionTreeModel { nodes, params })
}

fn grow(samples: &[LabeledSample], idx: Vec<usize>, depth: usize, params: TreeParams, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    let counts = class_counts(samples, &idx);
    let leaf = Node::Leaf {
        label: majority(&counts),
        counts,
    };
    let impurity = gini(&counts);
    if impurity <= GINI_EPS || depth >= params.max_depth || idx.len() < 2 * params.min_leaf {
        nodes.push(leaf);
        return me;
    }
    let Some(split) = best_split(samples, &idx, params.min_leaf) else {
        nodes.push(leaf);
        return me;
    };
    if split.weighted_gini >= impurity - GINI_EPS {
        nodes.push(leaf);
        return me;
    }

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| samples[i].features.0[split.feature] <= split.threshold);
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: me + 1,
        right: 0,
    });
    grow(samples, left_idx, depth + 1, params, nodes);
    let right_at = grow(samples, right_idx, depth + 1, params, nodes);
    if let Node::Split { right, .. } = &mut nodes[me] {
        *right = right_at;
    }
    me
}
