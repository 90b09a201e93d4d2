//! Binary CART classifier with Gini splits on single features.

use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::models::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            max_depth: 6,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Non-churner rate of the training customers reaching the leaf.
    Leaf { score: f64, size: usize },
    Split {
        feature: usize,
        /// Customers with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub root: Node,
    pub input_dim: usize,
}

impl CartTree {
    pub fn depth(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(left).max(go(right)),
            }
        }
        go(&self.root)
    }
}

impl Scorer for CartTree {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { score, .. } => return *score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: Vec<&'a [f64]>,
    y: Vec<bool>,
    cfg: CartConfig,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        Node::Leaf {
            score: if idx.is_empty() { 0.5 } else { pos as f64 / idx.len() as f64 },
            size: idx.len(),
        }
    }

    fn best_split(&self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.y[i]).count();
        let parent = n as f64 * gini(total_pos, n);
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for f in 0..self.x.first().map_or(0, |r| r.len()) {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(self.y[sorted[k - 1]]);
                let (lo, hi) = (self.x[sorted[k - 1]][f], self.x[sorted[k]][f]);
                if lo == hi || k < self.cfg.min_leaf || n - k < self.cfg.min_leaf {
                    continue;
                }
                let impurity =
                    k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(total_pos - left_pos, n - k);
                if impurity < parent - 1e-12 && best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: 0.5 * (lo + hi),
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn build(&self, idx: &[usize], depth: usize) -> Node {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if depth >= self.cfg.max_depth || pos == 0 || pos == idx.len() || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return self.leaf(idx);
        }
        match self.best_split(idx) {
            None => self.leaf(idx),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x[i][s.feature] <= s.threshold);
                Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: Box::new(self.build(&l, depth + 1)),
                    right: Box::new(self.build(&r, depth + 1)),
                }
            }
        }
    }
}

/// Greedy top-down fit. A node becomes a leaf when it is pure, reaches
/// `max_depth`, or admits no split leaving `min_leaf` customers on each side.
pub fn fit_cart(train: &Dataset, cfg: &CartConfig) -> CartTree {
    let builder = Builder {
        x: train.records.iter().map(|r| r.features.as_slice()).collect(),
        y: train.records.iter().map(|r| !r.label.is_churner()).collect(),
        cfg: *cfg,
    };
    let idx: Vec<usize> = (0..train.len()).collect();
    CartTree {
        root: builder.build(&idx, 0),
        input_dim: train.width(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::Label;
    use crate::domain::CustomerRecord;
    use crate::profit::accuracy;

    fn ds(points: &[([f64; 2], Label)]) -> Dataset {
        let records = points
            .iter()
            .map(|&(x, y)| CustomerRecord::new(x.to_vec(), y, 50.0).unwrap())
            .collect();
        Dataset::new("t", vec!["a".into(), "b".into()], records).unwrap()
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let d = ds(&[([0.0, 1.0], Label::Churner), ([3.0, 2.0], Label::Churner)]);
        let t = fit_cart(&d, &CartConfig { max_depth: 6, min_leaf: 1 });
        assert_eq!(t.root, Node::Leaf { score: 0.0, size: 2 });
    }

    #[test]
    fn single_perfect_feature_gives_depth_one() {
        // Feature b separates the classes; feature a is noise.
        let pts: Vec<([f64; 2], Label)> = (0..12)
            .map(|i| {
                let y = if i % 2 == 0 { Label::Churner } else { Label::NonChurner };
                let b = if y.is_churner() { -1.0 - i as f64 * 0.1 } else { 1.0 + i as f64 * 0.1 };
                ([((i * 7) % 5) as f64, b], y)
            })
            .collect();
        let d = ds(&pts);
        let t = fit_cart(&d, &CartConfig { max_depth: 6, min_leaf: 1 });
        assert_eq!(t.depth(), 1);
        match &t.root {
            Node::Split { feature, .. } => assert_eq!(*feature, 1),
            other => panic!("expected split, got {other:?}"),
        }
        let scores = t.score_dataset(&d).unwrap();
        assert_eq!(accuracy(&scores, &d.labels(), 0.5).unwrap(), 1.0);
    }

    #[test]
    fn zero_depth_predicts_root_rate() {
        let d = ds(&[
            ([0.0, 0.0], Label::Churner),
            ([1.0, 0.0], Label::NonChurner),
            ([2.0, 0.0], Label::NonChurner),
            ([3.0, 0.0], Label::NonChurner),
        ]);
        let t = fit_cart(&d, &CartConfig { max_depth: 0, min_leaf: 1 });
        assert_eq!(t.score(&[0.0, 0.0]).unwrap(), 0.75);
        assert_eq!(t.score(&[9.0, 9.0]).unwrap(), 0.75);
    }

    #[test]
    fn min_leaf_blocks_small_splits() {
        let d = ds(&[
            ([0.0, 0.0], Label::Churner),
            ([1.0, 0.0], Label::NonChurner),
            ([2.0, 0.0], Label::NonChurner),
            ([3.0, 0.0], Label::NonChurner),
        ]);
        let t = fit_cart(&d, &CartConfig { max_depth: 6, min_leaf: 2 });
        // The only clean split isolates one customer.
        assert!(matches!(t.root, Node::Split { .. } | Node::Leaf { .. }));
        fn min_size(n: &Node) -> usize {
            match n {
                Node::Leaf { size, .. } => *size,
                Node::Split { left, right, .. } => min_size(left).min(min_size(right)),
            }
        }
        assert!(min_size(&t.root) >= 2);
    }
}
