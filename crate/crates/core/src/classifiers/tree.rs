use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{invalid, ClassifierError};
use crate::matrix::Matrix;

const IMPURITY_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionTreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        DecisionTreeParams {
            max_depth: 5,
            min_samples_split: 2,
        }
    }
}

impl DecisionTreeParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if self.min_samples_split < 2 {
            return Err(invalid(
                "decision_tree.min_samples_split",
                "must be at least 2",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means floor(sqrt(d)).
    pub max_features: Option<usize>,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            n_trees: 10,
            max_depth: 5,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

impl RandomForestParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if self.n_trees == 0 {
            return Err(invalid("random_forest.n_trees", "must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(invalid(
                "random_forest.min_samples_split",
                "must be at least 2",
            ));
        }
        if self.max_features == Some(0) {
            return Err(invalid("random_forest.max_features", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Weighted class fractions of the training samples reaching the leaf.
        distribution: Vec<f64>,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Gini impurity of the node and weighted Gini of its two children.
        impurity: f64,
        children_impurity: f64,
    },
}

/// A binary CART tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: Option<usize>,
}

fn gini(class_weights: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - class_weights
        .iter()
        .map(|w| (w / total) * (w / total))
        .sum::<f64>()
}

struct Grower<'a, R> {
    x: &'a Matrix,
    targets: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    params: &'a GrowParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<R: RngCore> Grower<'_, R> {
    fn class_weights(&self, samples: &[usize]) -> (Vec<f64>, f64) {
        let mut cw = vec![0.0; self.n_classes];
        for &s in samples {
            cw[self.targets[s]] += self.weights[s];
        }
        let total = cw.iter().sum();
        (cw, total)
    }

    fn features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = rand::seq::index::sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, samples: &[usize], total: f64) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let mut order = samples.to_vec();
        for f in self.features() {
            let x = self.x;
            order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            let (mut right, _) = self.class_weights(&order);
            let mut w_left = 0.0;
            for k in 1..order.len() {
                let s = order[k - 1];
                let w = self.weights[s];
                left[self.targets[s]] += w;
                right[self.targets[s]] -= w;
                w_left += w;
                let (lo, hi) = (x.get(s, f), x.get(order[k], f));
                if lo >= hi {
                    continue;
                }
                let w_right = total - w_left;
                let imp = (w_left * gini(&left, w_left) + w_right * gini(&right, w_right)) / total;
                if best
                    .as_ref()
                    .is_none_or(|b| imp < b.impurity - IMPURITY_EPSILON)
                {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let (cw, total) = self.class_weights(samples);
        let impurity = gini(&cw, total);
        let leaf = |cw: Vec<f64>| Node::Leaf {
            distribution: cw
                .iter()
                .map(|w| if total > 0.0 { w / total } else { 0.0 })
                .collect(),
            samples: samples.len(),
        };
        if depth >= self.params.max_depth
            || samples.len() < self.params.min_samples_split
            || impurity <= 0.0
        {
            self.nodes.push(leaf(cw));
            return id;
        }
        let split = self
            .best_split(samples, total)
            .filter(|c| c.impurity < impurity - IMPURITY_EPSILON);
        let Some(c) = split else {
            self.nodes.push(leaf(cw));
            return id;
        };
        self.nodes.push(Node::Leaf {
            distribution: vec![],
            samples: 0,
        });
        let x = self.x;
        let mid = partition(samples, |&s| x.get(s, c.feature) <= c.threshold);
        let (l, r) = samples.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
            impurity,
            children_impurity: c.impurity,
        };
        id
    }
}

fn partition<T>(v: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut k = 0;
    for i in 0..v.len() {
        if pred(&v[i]) {
            v.swap(i, k);
            k += 1;
        }
    }
    k
}

impl Tree {
    /// Grows a tree on `samples` (row indices, repeats allowed) with per-row
    /// weights. With `rng` and `max_features`, each split considers a fresh
    /// random feature subset.
    pub(crate) fn grow<R: RngCore>(
        x: &Matrix,
        targets: &[usize],
        weights: &[f64],
        samples: &mut [usize],
        n_classes: usize,
        params: &GrowParams,
        rng: Option<&mut R>,
    ) -> Tree {
        let mut g = Grower {
            x,
            targets,
            weights,
            n_classes,
            params,
            rng,
            nodes: Vec::new(),
        };
        g.grow(samples, 0);
        Tree { nodes: g.nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn distribution(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { distribution, .. } => distribution,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Leaf label: the class with the largest weighted share, lowest index on ties.
    pub fn predict_one(&self, x: &[f64]) -> usize {
        let d = self.distribution(x);
        let mut best = 0;
        for (i, &v) in d.iter().enumerate() {
            if v > d[best] {
                best = i;
            }
        }
        best
    }

    /// Depth of the deepest node (a lone root has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    n_classes: usize,
    tree: Tree,
}

impl DecisionTree {
    pub(super) fn fit(
        params: &DecisionTreeParams,
        x: &Matrix,
        targets: &[usize],
        n_classes: usize,
    ) -> Self {
        let grow = GrowParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: None,
        };
        let weights = vec![1.0; x.rows()];
        let mut samples: Vec<usize> = (0..x.rows()).collect();
        let tree =
            Tree::grow::<ChaCha8Rng>(x, targets, &weights, &mut samples, n_classes, &grow, None);
        DecisionTree { n_classes, tree }
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(self.tree.distribution(r));
        }
        out
    }
}

fn bootstrap_with(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// The bootstrap rows drawn for a forest tree with the given per-tree seed.
pub fn bootstrap_sample(tree_seed: u64, n: usize) -> Vec<usize> {
    bootstrap_with(&mut ChaCha8Rng::seed_from_u64(tree_seed), n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    n_classes: usize,
    tree_seeds: Vec<u64>,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub(super) fn fit(
        params: &RandomForestParams,
        x: &Matrix,
        targets: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let d = x.cols();
        let max_features = params
            .max_features
            .unwrap_or(((d as f64).sqrt().floor() as usize).max(1))
            .min(d.max(1));
        let grow = GrowParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: Some(max_features),
        };
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
        let weights = vec![1.0; x.rows()];
        let trees = tree_seeds
            .par_iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut samples = bootstrap_with(&mut rng, x.rows());
                Tree::grow(
                    x,
                    targets,
                    &weights,
                    &mut samples,
                    n_classes,
                    &grow,
                    Some(&mut rng),
                )
            })
            .collect();
        RandomForest {
            n_classes,
            tree_seeds,
            trees,
        }
    }

    pub fn tree_seeds(&self) -> &[u64] {
        &self.tree_seeds
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Fraction of trees voting for each class.
    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let share = 1.0 / self.trees.len() as f64;
        for (i, r) in x.iter_rows().enumerate() {
            let row = out.row_mut(i);
            for t in &self.trees {
                row[t.predict_one(r)] += share;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree_on(x: &Matrix, targets: &[usize], n_classes: usize, max_depth: usize) -> Tree {
        let p = GrowParams {
            max_depth,
            min_samples_split: 2,
            max_features: None,
        };
        let w = vec![1.0; x.rows()];
        let mut s: Vec<usize> = (0..x.rows()).collect();
        Tree::grow::<ChaCha8Rng>(x, targets, &w, &mut s, n_classes, &p, None)
    }

    #[test]
    fn one_threshold_separates_sign() {
        let xs: Vec<f64> = (-10..10).map(|i| i as f64 + 0.5).collect();
        let targets: Vec<usize> = xs.iter().map(|&v| usize::from(v >= 0.0)).collect();
        let x = Matrix::from_vec(20, 1, xs);
        let t = tree_on(&x, &targets, 2, 5);
        assert_eq!(t.split_count(), 1);
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 0.0),
            _ => panic!(),
        }
        for (i, r) in x.iter_rows().enumerate() {
            assert_eq!(t.predict_one(r), targets[i]);
        }
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Both features separate perfectly; feature 0 must win.
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]], 2);
        let t = tree_on(&x, &[0, 1], 2, 5);
        match &t.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((*feature, *threshold), (0, 0.5)),
            _ => panic!(),
        }
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]], 1);
        let t = tree_on(&x, &[0, 1, 1], 2, 5);
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_one(&[1.0]), 1);
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]], 1);
        let t = tree_on(&x, &[2, 2, 0], 3, 0);
        assert_eq!(t.depth(), 0);
        assert_eq!(t.predict_one(&[0.0]), 2);
    }
}
