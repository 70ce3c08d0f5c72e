use serde::{Deserialize, Serialize};

use super::{check_xy, Classifier, MlError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 16,
            min_samples_split: 2,
        }
    }
}

/// `counts` is `[low, high]` for the training rows reaching the node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        counts: [usize; 2],
    },
}

impl TreeNode {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            TreeNode::Leaf { counts } | TreeNode::Split { counts, .. } => *counts,
        }
    }
}

/// CART classifier with Gini impurity. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub params: TreeParams,
}

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

fn count(y: &[bool], idx: &[usize]) -> [usize; 2] {
    let high = idx.iter().filter(|&&i| y[i]).count();
    [idx.len() - high, high]
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Lowest weighted child impurity over all features and all midpoints
/// between consecutive distinct values. Ties keep the earliest candidate.
fn best_split(x: &[Vec<f64>], y: &[bool], idx: &[usize]) -> Option<Best> {
    let n = idx.len() as f64;
    let total = count(y, idx);
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for feature in 0..x[idx[0]].len() {
        order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let mut left = [0usize; 2];
        for k in 0..order.len() - 1 {
            left[usize::from(y[order[k]])] += 1;
            let (lo, hi) = (x[order[k]][feature], x[order[k + 1]][feature]);
            if lo == hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (k + 1) as f64;
            let impurity = (nl * gini(left) + (n - nl) * gini(right)) / n;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mut threshold = lo + (hi - lo) / 2.0;
                // the midpoint can round up to `hi` for adjacent floats
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
    }
    best
}

pub fn fit_decision_tree(
    x: &[Vec<f64>],
    y: &[bool],
    params: TreeParams,
) -> Result<DecisionTree, MlError> {
    check_xy(x, y)?;
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        params,
    };
    let all: Vec<usize> = (0..x.len()).collect();
    grow(&mut tree, x, y, all, 0);
    Ok(tree)
}

fn grow(tree: &mut DecisionTree, x: &[Vec<f64>], y: &[bool], idx: Vec<usize>, depth: usize) -> usize {
    let counts = count(y, &idx);
    let id = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf { counts });
    let parent = gini(counts);
    if parent == 0.0 || idx.len() < tree.params.min_samples_split || depth >= tree.params.max_depth {
        return id;
    }
    let Some(best) = best_split(x, y, &idx) else {
        return id;
    };
    if best.impurity >= parent - 1e-12 {
        return id;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| x[i][best.feature] <= best.threshold);
    let left = grow(tree, x, y, l, depth + 1);
    let right = grow(tree, x, y, r, depth + 1);
    tree.nodes[id] = TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
        counts,
    };
    id
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf_for(&self, x: &[f64]) -> [usize; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl Classifier for DecisionTree {
    /// Majority class of the leaf; ties go to `Low`.
    fn predict(&self, x: &[f64]) -> bool {
        let c = self.leaf_for(x);
        c[1] > c[0]
    }
}
