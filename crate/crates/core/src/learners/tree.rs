//! Binary decision trees shared by the forest, the booster and the imputer.
//!
//! Splits send `x <= threshold` left, where `threshold` is the largest
//! left-hand training value, so tree decisions depend only on the order of
//! each feature. Ties in split cost go to the lowest feature index, then
//! the lowest threshold.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::StreamRng;

/// Column-major training data.
pub(crate) struct Columns<'a> {
    pub cols: &'a [Vec<f64>],
    pub n_rows: usize,
}

/// Per-feature row order sorted by (value, row).
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(data: &Columns<'_>) -> Presorted {
        let order = data
            .cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..data.n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { order }
    }
}

/// Sufficient statistics and node cost for one split criterion. Lower cost is better.
pub(crate) trait Objective: Sync {
    type Acc: Clone;
    fn empty(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, row: usize, w: f64);
    fn sub(&self, acc: &mut Self::Acc, row: usize, w: f64);
    fn cost(&self, acc: &Self::Acc) -> f64;
    fn leaf(&self, acc: &Self::Acc) -> Vec<f64>;
    fn is_pure(&self, acc: &Self::Acc) -> bool;
    /// Minimum cost decrease for a split to be accepted; `None` accepts any valid split.
    fn min_gain(&self, parent_cost: f64) -> Option<f64>;
}

/// Gini impurity over `n_classes` labels; leaves hold class fractions.
pub(crate) struct Gini<'a> {
    pub labels: &'a [u32],
    pub n_classes: usize,
}

impl Objective for Gini<'_> {
    type Acc = Vec<f64>;

    fn empty(&self) -> Vec<f64> {
        vec![0.0; self.n_classes]
    }

    fn add(&self, acc: &mut Vec<f64>, row: usize, w: f64) {
        acc[self.labels[row] as usize] += w;
    }

    fn sub(&self, acc: &mut Vec<f64>, row: usize, w: f64) {
        acc[self.labels[row] as usize] -= w;
    }

    /// Weighted impurity `W * gini = W - sum(c^2) / W`.
    fn cost(&self, acc: &Vec<f64>) -> f64 {
        let w: f64 = acc.iter().sum();
        if w <= 0.0 {
            return 0.0;
        }
        w - acc.iter().map(|c| c * c).sum::<f64>() / w
    }

    fn leaf(&self, acc: &Vec<f64>) -> Vec<f64> {
        let w: f64 = acc.iter().sum();
        acc.iter().map(|c| c / w).collect()
    }

    fn is_pure(&self, acc: &Vec<f64>) -> bool {
        acc.iter().filter(|&&c| c > 0.0).count() <= 1
    }

    fn min_gain(&self, _parent_cost: f64) -> Option<f64> {
        None
    }
}

/// Squared error; leaves hold the weighted mean.
pub(crate) struct SquaredError<'a> {
    pub targets: &'a [f64],
}

impl Objective for SquaredError<'_> {
    /// (weight, sum w*y, sum w*y^2)
    type Acc = (f64, f64, f64);

    fn empty(&self) -> Self::Acc {
        (0.0, 0.0, 0.0)
    }

    fn add(&self, acc: &mut Self::Acc, row: usize, w: f64) {
        let y = self.targets[row];
        acc.0 += w;
        acc.1 += w * y;
        acc.2 += w * y * y;
    }

    fn sub(&self, acc: &mut Self::Acc, row: usize, w: f64) {
        let y = self.targets[row];
        acc.0 -= w;
        acc.1 -= w * y;
        acc.2 -= w * y * y;
    }

    fn cost(&self, acc: &Self::Acc) -> f64 {
        if acc.0 <= 0.0 {
            return 0.0;
        }
        (acc.2 - acc.1 * acc.1 / acc.0).max(0.0)
    }

    fn leaf(&self, acc: &Self::Acc) -> Vec<f64> {
        vec![acc.1 / acc.0]
    }

    fn is_pure(&self, acc: &Self::Acc) -> bool {
        let scale = acc.2.abs().max(1e-300);
        self.cost(acc) <= 1e-12 * scale
    }

    fn min_gain(&self, _parent_cost: f64) -> Option<f64> {
        None
    }
}

/// Second-order logistic objective with L2 leaf regularization.
pub(crate) struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
}

impl Objective for Newton<'_> {
    /// (sum g, sum h)
    type Acc = (f64, f64);

    fn empty(&self) -> Self::Acc {
        (0.0, 0.0)
    }

    fn add(&self, acc: &mut Self::Acc, row: usize, w: f64) {
        acc.0 += w * self.grad[row];
        acc.1 += w * self.hess[row];
    }

    fn sub(&self, acc: &mut Self::Acc, row: usize, w: f64) {
        acc.0 -= w * self.grad[row];
        acc.1 -= w * self.hess[row];
    }

    fn cost(&self, acc: &Self::Acc) -> f64 {
        let den = acc.1 + self.lambda;
        if den <= 0.0 {
            return 0.0;
        }
        -acc.0 * acc.0 / den
    }

    fn leaf(&self, acc: &Self::Acc) -> Vec<f64> {
        let den = acc.1 + self.lambda;
        vec![if den > 0.0 { -acc.0 / den } else { 0.0 }]
    }

    fn is_pure(&self, _acc: &Self::Acc) -> bool {
        false
    }

    fn min_gain(&self, parent_cost: f64) -> Option<f64> {
        Some(1e-9 * parent_cost.abs() + 1e-15)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: impl Fn(usize) -> f64) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    /// Depth of every node (root = 0), in node order.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        for i in 0..self.nodes.len() {
            if let Node::Split { left, right, .. } = self.nodes[i] {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        depth
    }

    pub fn max_depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Shallowest depth at which each feature splits, if it does.
    pub fn min_split_depths(&self, n_features: usize) -> Vec<Option<usize>> {
        let depth = self.depths();
        let mut out = vec![None; n_features];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { feature, .. } = node {
                let d = depth[i];
                if out[*feature].is_none_or(|cur| d < cur) {
                    out[*feature] = Some(d);
                }
            }
        }
        out
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    /// Minimum total weight in each child.
    pub min_leaf: f64,
    /// Features evaluated per node; `None` evaluates all in index order.
    pub mtry: Option<usize>,
}

struct Best {
    cost: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a, O: Objective> {
    obj: &'a O,
    data: &'a Columns<'a>,
    presorted: Option<&'a Presorted>,
    params: GrowParams,
    /// Node stamp per row for presorted scans.
    stamp: Vec<u32>,
    weight: Vec<f64>,
    next_stamp: u32,
    scratch: Vec<(f64, u32)>,
}

impl<'a, O: Objective> Builder<'a, O> {
    /// Sorted (value, row) pairs of `rows` on `feature`.
    fn sorted(&mut self, feature: usize, rows: &[(u32, f64)]) -> Vec<(f64, u32)> {
        let col = &self.data.cols[feature];
        let use_presorted = self
            .presorted
            .is_some_and(|_| rows.len() * 16 >= self.data.n_rows);
        let mut out = std::mem::take(&mut self.scratch);
        out.clear();
        if use_presorted {
            let order = &self.presorted.unwrap().order[feature];
            let stamp = self.next_stamp;
            out.extend(
                order
                    .iter()
                    .filter(|&&r| self.stamp[r as usize] == stamp)
                    .map(|&r| (col[r as usize], r)),
            );
        } else {
            out.extend(rows.iter().map(|&(r, _)| (col[r as usize], r)));
            out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        out
    }

    fn best_split(&mut self, rows: &[(u32, f64)], total: &O::Acc, rng: Option<&mut StreamRng>) -> Option<Best> {
        let n_features = self.data.cols.len();
        let features: Vec<usize> = match (self.params.mtry, rng) {
            (Some(_), Some(rng)) => {
                let mut f: Vec<usize> = (0..n_features).collect();
                f.shuffle(rng);
                f
            }
            _ => (0..n_features).collect(),
        };
        let quota = self.params.mtry.unwrap_or(n_features);
        if self.presorted.is_some() {
            self.next_stamp += 1;
            for &(r, w) in rows {
                self.stamp[r as usize] = self.next_stamp;
                self.weight[r as usize] = w;
            }
        } else {
            for &(r, w) in rows {
                self.weight[r as usize] = w;
            }
        }
        let min_leaf = self.params.min_leaf;
        let mut best: Option<Best> = None;
        let mut visited = 0;
        for f in features {
            if visited >= quota {
                break;
            }
            let sorted = self.sorted(f, rows);
            if sorted.first().map(|p| p.0) == sorted.last().map(|p| p.0) {
                self.scratch = sorted;
                continue;
            }
            visited += 1;
            let mut left = self.obj.empty();
            let mut right = total.clone();
            let mut wl = 0.0;
            let wt: f64 = rows.iter().map(|&(_, w)| w).sum();
            for i in 0..sorted.len() - 1 {
                let (v, r) = sorted[i];
                let w = self.weight[r as usize];
                self.obj.add(&mut left, r as usize, w);
                self.obj.sub(&mut right, r as usize, w);
                wl += w;
                let next = sorted[i + 1].0;
                if v == next || wl < min_leaf || wt - wl < min_leaf {
                    continue;
                }
                let cost = self.obj.cost(&left) + self.obj.cost(&right);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        cost < b.cost
                            || (cost == b.cost && (f < b.feature || (f == b.feature && v < b.threshold)))
                    }
                };
                if better {
                    best = Some(Best {
                        cost,
                        feature: f,
                        threshold: v,
                    });
                }
            }
            self.scratch = sorted;
        }
        best
    }
}

/// Grows a tree on weighted rows (duplicates collapsed into weights).
pub(crate) fn grow<O: Objective>(
    obj: &O,
    data: &Columns<'_>,
    presorted: Option<&Presorted>,
    rows: Vec<(u32, f64)>,
    params: GrowParams,
    mut rng: Option<&mut StreamRng>,
) -> Tree {
    let mut b = Builder {
        obj,
        data,
        presorted,
        params,
        stamp: vec![0; data.n_rows],
        weight: vec![0.0; data.n_rows],
        next_stamp: 0,
        scratch: Vec::new(),
    };
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: vec![] }];
    // (node index, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let mut total = obj.empty();
        let mut wt = 0.0;
        for &(r, w) in &rows {
            obj.add(&mut total, r as usize, w);
            wt += w;
        }
        let can_split = !obj.is_pure(&total)
            && params.max_depth.is_none_or(|d| depth < d)
            && wt >= 2.0 * params.min_leaf
            && rows.len() >= 2;
        let split = if can_split {
            b.best_split(&rows, &total, rng.as_deref_mut())
        } else {
            None
        };
        let split = split.filter(|s| {
            let parent = obj.cost(&total);
            match obj.min_gain(parent) {
                None => true,
                Some(g) => parent - s.cost > g,
            }
        });
        match split {
            None => nodes[id] = Node::Leaf { value: obj.leaf(&total) },
            Some(s) => {
                let col = &data.cols[s.feature];
                let (l, r): (Vec<_>, Vec<_>) = rows.into_iter().partition(|&(row, _)| col[row as usize] <= s.threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: vec![] });
                nodes.push(Node::Leaf { value: vec![] });
                nodes[id] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}

/// Collapses a bootstrap draw into (row, multiplicity) pairs in row order.
pub(crate) fn collapse(draw: &[usize], n_rows: usize) -> Vec<(u32, f64)> {
    let mut counts = vec![0u32; n_rows];
    for &r in draw {
        counts[r] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(r, &c)| (r as u32, f64::from(c)))
        .collect()
}
