//! CART regression tree grown by greedy variance reduction.
//!
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values; rows with `x[feature] <= threshold` go left. Splits whose gains
//! agree to within rounding (relative 1e-10 of the node's squared error)
//! count as ties and resolve to the lowest feature index, then the lowest
//! threshold.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FeatureVector, LabeledRow, Regressor, FEATURE_COUNT};
use crate::rng::{rng_from_seed, SimRng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 20, min_samples_leaf: 1, max_features: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        /// Reduction of the summed squared error achieved by this split.
        gain: f64,
    },
}

/// Prediction layout: pre-order, left child at `i + 1`, leaves marked by
/// `feature == LEAF` with the value in `threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct FlatNode {
    threshold: f64,
    feature: u32,
    right: u32,
}

const LEAF: u32 = u32::MAX;

fn flatten(nodes: &[Node]) -> Vec<FlatNode> {
    let mut flat: Vec<FlatNode> = Vec::with_capacity(nodes.len());
    let mut stack = alloc::vec![(0usize, None::<usize>)];
    while let Some((i, parent)) = stack.pop() {
        let at = flat.len();
        if let Some(p) = parent {
            flat[p].right = at as u32;
        }
        match nodes[i] {
            Node::Leaf { value, .. } => flat.push(FlatNode { threshold: value, feature: LEAF, right: 0 }),
            Node::Split { feature, threshold, left, right, .. } => {
                flat.push(FlatNode { threshold, feature: feature as u32, right: 0 });
                stack.push((right, Some(at)));
                stack.push((left, None));
            }
        }
    }
    flat
}

#[derive(Serialize, Deserialize)]
struct TreeData {
    nodes: Vec<Node>,
    max_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeData", into = "TreeData")]
pub struct RegressionTree {
    nodes: Vec<Node>,
    max_depth: usize,
    flat: Vec<FlatNode>,
}

impl TryFrom<TreeData> for RegressionTree {
    type Error = Error;

    fn try_from(d: TreeData) -> Result<Self> {
        let tree = Self { flat: Vec::new(), nodes: d.nodes, max_depth: d.max_depth };
        tree.validate()?;
        Ok(Self { flat: flatten(&tree.nodes), ..tree })
    }
}

impl From<RegressionTree> for TreeData {
    fn from(t: RegressionTree) -> Self {
        Self { nodes: t.nodes, max_depth: t.max_depth }
    }
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn root_samples(&self) -> usize {
        match self.nodes[0] {
            Node::Leaf { samples, .. } | Node::Split { samples, .. } => samples,
        }
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, .. } => Some(*value),
            Node::Split { .. } => None,
        })
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

    /// Checks child links and feature indices, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ModelMismatch(alloc::format!("corrupt tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes");
        }
        let n = self.nodes.len();
        let mut seen = alloc::vec![false; n];
        let mut stack = alloc::vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            if i >= n || seen[i] {
                return bad("dangling or shared child link");
            }
            seen[i] = true;
            if let Node::Split { feature, left, right, threshold, .. } = self.nodes[i] {
                if feature >= FEATURE_COUNT || !threshold.is_finite() {
                    return bad("invalid split");
                }
                stack.push((left, depth + 1));
                stack.push((right, depth + 1));
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable node");
        }
        Ok(())
    }
}

impl Regressor for RegressionTree {
    fn predict(&self, x: &FeatureVector) -> f64 {
        let mut i = 0;
        loop {
            let n = self.flat[i];
            if n.feature == LEAF {
                return n.threshold;
            }
            i = if x.0[n.feature as usize] <= n.threshold { i + 1 } else { n.right as usize };
        }
    }
}

/// Sum of the trees' predictions, in tree order. Walks several trees in
/// lockstep so their cache misses overlap.
pub(super) fn sum_predictions(trees: &[RegressionTree], x: &FeatureVector) -> f64 {
    const LANES: usize = 8;
    let mut sum = 0.0;
    for group in trees.chunks(LANES) {
        let mut at = [0usize; LANES];
        let mut out = [0.0; LANES];
        let mut done = [false; LANES];
        let mut live = group.len();
        while live > 0 {
            for (j, tree) in group.iter().enumerate() {
                if done[j] {
                    continue;
                }
                let n = tree.flat[at[j]];
                if n.feature == LEAF {
                    out[j] = n.threshold;
                    done[j] = true;
                    live -= 1;
                } else {
                    at[j] = if x.0[n.feature as usize] <= n.threshold { at[j] + 1 } else { n.right as usize };
                }
            }
        }
        for v in &out[..group.len()] {
            sum += v;
        }
    }
    sum
}

/// Trains a single tree on all rows (no resampling).
pub fn train_tree(rows: &[LabeledRow], params: &TreeParams, seed: u64) -> Result<RegressionTree> {
    grow(rows, (0..rows.len()).collect(), params, rng_from_seed(seed))
}

/// Grows a tree over the given row indices; indices may repeat.
pub(crate) fn grow(
    rows: &[LabeledRow],
    mut indices: Vec<usize>,
    params: &TreeParams,
    rng: SimRng,
) -> Result<RegressionTree> {
    if rows.is_empty() || indices.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
    }
    if params.max_features == Some(0) {
        return Err(Error::InvalidConfig("max_features must be >= 1".into()));
    }
    let mut builder = Builder { rows, params, rng, nodes: Vec::new(), buf: Vec::new() };
    builder.build(&mut indices, 0);
    let flat = flatten(&builder.nodes);
    Ok(RegressionTree { nodes: builder.nodes, max_depth: params.max_depth, flat })
}

struct Builder<'a> {
    rows: &'a [LabeledRow],
    params: &'a TreeParams,
    rng: SimRng,
    nodes: Vec<Node>,
    buf: Vec<(f64, f64)>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.rows[i].y).sum::<f64>() / n as f64;
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean, samples: n });

        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            return slot;
        }
        let first = self.rows[idx[0]].y;
        if idx.iter().all(|&i| self.rows[i].y == first) {
            self.nodes[slot] = Node::Leaf { value: first, samples: n };
            return slot;
        }
        let sse: f64 = idx.iter().map(|&i| (self.rows[i].y - mean) * (self.rows[i].y - mean)).sum();
        let Some(best) = self.best_split(idx, mean, sse * 1e-10) else {
            return slot;
        };
        if !(best.gain > sse * 1e-12) {
            return slot;
        }

        let mut split = 0;
        for j in 0..n {
            if self.rows[idx[j]].x.0[best.feature] <= best.threshold {
                idx.swap(split, j);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            samples: n,
            gain: best.gain,
        };
        slot
    }

    fn best_split(&mut self, idx: &[usize], mean: f64, tie_tol: f64) -> Option<Candidate> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf;
        let mut order: [usize; FEATURE_COUNT] = core::array::from_fn(|i| i);
        let limit = match self.params.max_features {
            Some(m) if m < FEATURE_COUNT => {
                order.shuffle(&mut self.rng);
                m
            }
            _ => FEATURE_COUNT,
        };

        let total: f64 = idx.iter().map(|&i| self.rows[i].y - mean).sum();
        let parent = total * total / n as f64;
        let mut best: Option<Candidate> = None;
        let mut informative = 0;
        for &f in &order {
            if informative == limit {
                break;
            }
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (self.rows[i].x.0[f], self.rows[i].y - mean)));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[n - 1].0 {
                continue;
            }
            informative += 1;

            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += self.buf[i - 1].1;
                let (a, b) = (self.buf[i - 1].0, self.buf[i].0);
                if a == b || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / i as f64
                    + right_sum * right_sum / (n - i) as f64
                    - parent;
                let threshold = midpoint(a, b);
                let better = match &best {
                    None => true,
                    Some(c) => {
                        gain > c.gain + tie_tol
                            || ((gain - c.gain).abs() <= tie_tol
                                && (f < c.feature || (f == c.feature && threshold < c.threshold)))
                    }
                };
                if better {
                    best = Some(Candidate { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

/// Midpoint of `a < b` that still separates them after rounding.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::Feature;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    fn row(sinr: f64, y: f64) -> LabeledRow {
        LabeledRow::new(FeatureVector([1.0; 9]).with(Feature::Sinr, sinr), y)
    }

    /// Brute-force depth-1 splits: every (feature, gap) pair, SSE by direct
    /// two-pass evaluation. Returns all splits within `tol` of the best gain
    /// as (feature, gap low, gap high, gain).
    pub(crate) fn exhaustive_splits(rows: &[LabeledRow], tol: f64) -> Vec<(usize, f64, f64, f64)> {
        fn sse(v: &[f64]) -> f64 {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|y| (y - m) * (y - m)).sum()
        }
        let ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
        let parent = sse(&ys);
        let mut all = Vec::new();
        for f in 0..FEATURE_COUNT {
            let mut vals: Vec<f64> = rows.iter().map(|r| r.x.0[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let (l, r): (Vec<&LabeledRow>, Vec<&LabeledRow>) =
                    rows.iter().partition(|row| row.x.0[f] <= w[0]);
                let ly: Vec<f64> = l.iter().map(|r| r.y).collect();
                let ry: Vec<f64> = r.iter().map(|r| r.y).collect();
                all.push((f, w[0], w[1], parent - sse(&ly) - sse(&ry)));
            }
        }
        let best = all.iter().map(|c| c.3).fold(f64::NEG_INFINITY, f64::max);
        all.retain(|c| c.3 >= best - tol * (1.0 + best.abs()));
        all
    }

    #[test]
    fn single_row_is_leaf() {
        let t = train_tree(&[row(3.0, 5.0)], &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 5.0, samples: 1 }]);
    }

    #[test]
    fn constant_targets_single_leaf() {
        let rows: Vec<_> = (0..20).map(|i| row(i as f64, 3.2)).collect();
        let t = train_tree(&rows, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 3.2, samples: 20 }]);
    }

    #[test]
    fn four_point_depth_one() {
        let rows = [row(0.0, 1.0), row(1.0, 1.0), row(10.0, 9.0), row(11.0, 9.0)];
        let params = TreeParams { max_depth: 1, ..Default::default() };
        let t = train_tree(&rows, &params, 0).unwrap();
        match t.nodes()[0] {
            Node::Split { feature, threshold, left, right, .. } => {
                assert_eq!(feature, Feature::Sinr.index());
                assert!(threshold > 1.0 && threshold < 10.0);
                assert_eq!(t.nodes()[left], Node::Leaf { value: 1.0, samples: 2 });
                assert_eq!(t.nodes()[right], Node::Leaf { value: 9.0, samples: 2 });
            }
            ref n => panic!("expected split, got {n:?}"),
        }
        let best = exhaustive_splits(&rows, 1e-12);
        assert_eq!(best.len(), 1);
        assert_eq!((best[0].0, best[0].1, best[0].2), (3, 1.0, 10.0));
    }

    #[test]
    fn depth_limit_and_validation() {
        let rows: Vec<_> = (0..64).map(|i| row(i as f64, (i * i) as f64)).collect();
        for d in 0..5 {
            let t = train_tree(&rows, &TreeParams { max_depth: d, ..Default::default() }, 1).unwrap();
            assert!(t.depth() <= d);
            t.validate().unwrap();
        }
        assert!(train_tree(&[], &TreeParams::default(), 0).is_err());
    }

    #[test]
    fn leaf_is_mean_of_routed_targets() {
        let mut rng = crate::rng::rng_from_seed(9);
        let rows: Vec<_> = (0..200)
            .map(|_| {
                let x = FeatureVector(core::array::from_fn(|_| rng.random::<f64>()));
                LabeledRow::new(x, rng.random::<f64>() * 10.0)
            })
            .collect();
        let t = train_tree(&rows, &TreeParams { max_depth: 4, ..Default::default() }, 2).unwrap();
        let mut sums = vec![(0.0, 0usize); t.nodes().len()];
        for r in &rows {
            let mut i = 0;
            while let Node::Split { feature, threshold, left, right, .. } = t.nodes()[i] {
                i = if r.x.0[feature] <= threshold { left } else { right };
            }
            sums[i].0 += r.y;
            sums[i].1 += 1;
        }
        for (i, n) in t.nodes().iter().enumerate() {
            if let Node::Leaf { value, samples } = *n {
                assert_eq!(samples, sums[i].1);
                assert!((value - sums[i].0 / samples as f64).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn depth_one_matches_exhaustive(
            seed in any::<u64>(), n in 2usize..=64,
        ) {
            let mut rng = crate::rng::rng_from_seed(seed);
            let rows: Vec<_> = (0..n)
                .map(|_| {
                    let x = FeatureVector(core::array::from_fn(|_| (rng.random::<f64>() * 20.0).round()));
                    LabeledRow::new(x, rng.random::<f64>() * 10.0)
                })
                .collect();
            let t = train_tree(&rows, &TreeParams { max_depth: 1, ..Default::default() }, 0).unwrap();
            let optimal = exhaustive_splits(&rows, 1e-9);
            match &t.nodes()[0] {
                Node::Split { feature, threshold, gain, .. } => {
                    let hit = optimal.iter().any(|&(f, lo, hi, g)| {
                        f == *feature && *threshold > lo && *threshold < hi
                            && (g - gain).abs() <= 1e-9 * (1.0 + g.abs())
                    });
                    prop_assert!(hit);
                }
                Node::Leaf { .. } => prop_assert!(optimal.iter().all(|c| c.3 <= 1e-9)),
            }
        }

        #[test]
        fn permuting_rows_keeps_predictions(seed in any::<u64>(), n in 2usize..=80) {
            let mut rng = crate::rng::rng_from_seed(seed);
            let rows: Vec<_> = (0..n)
                .map(|_| {
                    let x = FeatureVector(core::array::from_fn(|_| rng.random::<f64>()));
                    LabeledRow::new(x, rng.random::<f64>())
                })
                .collect();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            let p = TreeParams::default();
            let a = train_tree(&rows, &p, 3).unwrap();
            let b = train_tree(&shuffled, &p, 3).unwrap();
            for r in &rows {
                prop_assert!((a.predict(&r.x) - b.predict(&r.x)).abs() < 1e-12);
            }
        }
    }
}
