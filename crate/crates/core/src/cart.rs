//! Binary classification trees on a [`LabeledPool`], grown by Gini impurity.
//!
//! Two fitters share one tree representation:
//!
//! * [`fit_greedy`]: the usual top-down CART recursion. Each node takes the
//!   split that most reduces the two-child impurity; growth stops on depth,
//!   purity or leaf size, and the complexity parameter `cp` then decides which
//!   splits survive (see [`CpRule`]).
//! * [`fit_exact`]: exhaustive search over every tree with at most one or two
//!   splits, returning a global impurity minimiser.
//!
//! Impurity of a node holding `a` ones among `m` rows is `a (1 - a/m)`; the
//! tree impurity is the sum over leaves. Candidate thresholds are midpoints of
//! consecutive distinct values, rows `<= threshold` go left, and equal scores
//! are resolved towards the lowest feature index and then the lowest threshold.
//! Score comparisons are done on exact integer fractions, so tie-breaking does
//! not depend on rounding.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, LabeledPool};
use crate::error::{PmseError, Result};
use crate::scalar::Scalar;

/// Work budget for [`fit_exact`] when none is given: `N * C^D` must stay below it.
pub const DEFAULT_EXACT_BUDGET: u64 = 500_000_000;

/// How the complexity parameter limits tree size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpRule {
    /// Cost-complexity pruning on misclassification risk, as in rpart.
    /// Nodes whose risk `min(a, m - a)` is at most `α = cp · root risk` are
    /// not split; after growth, a subtree is collapsed when the risk it
    /// removes per split (weakest-link accounting) is at most `α`.
    #[default]
    CostComplexity,
    /// Pre-stopping: a split is made only if it alone reduces Gini impurity
    /// by at least `cp` times the root impurity.
    ImpurityGain,
}

/// Stopping and pruning rules for [`fit_greedy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// `None` grows until another rule stops it.
    pub max_depth: Option<usize>,
    /// Complexity parameter, relative to the root (see [`CpRule`]).
    pub cp: f64,
    /// Minimum rows in each child.
    pub min_leaf: usize,
    #[serde(default)]
    pub cp_rule: CpRule,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            cp: 0.01,
            min_leaf: 1,
            cp_rule: CpRule::default(),
        }
    }
}

impl FitConfig {
    pub fn with_depth(max_depth: Option<usize>, cp: f64) -> Self {
        Self {
            max_depth,
            cp,
            ..Self::default()
        }
    }

    pub fn with_rule(mut self, cp_rule: CpRule) -> Self {
        self.cp_rule = cp_rule;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.cp >= 0.0) || !self.cp.is_finite() {
            return Err(PmseError::Domain(format!(
                "cp must be finite and >= 0, got {}",
                self.cp
            )));
        }
        if self.min_leaf == 0 {
            return Err(PmseError::Domain("min_leaf must be >= 1".into()));
        }
        Ok(())
    }

    /// Thresholds derived from the root counts.
    fn limits(&self, root: NodeCounts) -> Limits {
        Limits {
            min_gain: self.cp * root.impurity::<f64>(),
            alpha: self.cp * root.risk() as f64,
        }
    }

    /// Whether growth may split a node at `depth` with `counts`.
    fn may_split(&self, limits: &Limits, counts: NodeCounts, depth: usize) -> bool {
        !counts.is_pure()
            && self.max_depth.is_none_or(|d| depth < d)
            && counts.total >= 2 * self.min_leaf
            && match self.cp_rule {
                CpRule::CostComplexity => counts.risk() as f64 > limits.alpha,
                CpRule::ImpurityGain => true,
            }
    }

    /// Whether growth keeps a split with impurity reduction `gain`.
    fn accepts_gain(&self, limits: &Limits, gain: f64) -> bool {
        gain > 0.0
            && match self.cp_rule {
                CpRule::CostComplexity => true,
                CpRule::ImpurityGain => gain >= limits.min_gain,
            }
    }
}

#[derive(Debug, Clone, Copy)]
struct Limits {
    min_gain: f64,
    alpha: f64,
}

/// Which fitter to use when a tree is needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TreeFitter {
    Greedy(FitConfig),
    Exact { splits: usize, budget: u64 },
}

impl Default for TreeFitter {
    fn default() -> Self {
        TreeFitter::Greedy(FitConfig::default())
    }
}

impl TreeFitter {
    pub fn exact(splits: usize) -> Self {
        TreeFitter::Exact {
            splits,
            budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn fit<T: Scalar>(&self, pool: &LabeledPool<T>) -> Result<DecisionTree<T>> {
        match *self {
            TreeFitter::Greedy(cfg) => fit_greedy(pool, &cfg),
            TreeFitter::Exact { splits, budget } => fit_exact(pool, splits, budget),
        }
    }
}

/// Rows with `value <= threshold` on `feature` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule<T> {
    pub feature: usize,
    pub threshold: T,
}

impl<T: Scalar> SplitRule<T> {
    #[inline]
    pub fn goes_left(&self, row: &[T]) -> bool {
        row[self.feature] <= self.threshold
    }
}

/// Label counts of the rows reaching a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeCounts {
    /// Rows labelled 1 (`a`).
    pub ones: usize,
    /// All rows (`m`).
    pub total: usize,
}

impl NodeCounts {
    pub fn new(ones: usize, total: usize) -> Self {
        debug_assert!(ones <= total);
        Self { ones, total }
    }

    pub fn is_pure(&self) -> bool {
        self.ones == 0 || self.ones == self.total
    }

    /// `a (1 - a/m)`; zero for an empty node.
    pub fn impurity<T: Scalar>(&self) -> T {
        if self.total == 0 {
            return T::zero();
        }
        let a = T::from_count(self.ones);
        a * (T::one() - a / T::from_count(self.total))
    }

    /// Misclassification count of a majority vote, `min(a, m - a)`.
    pub fn risk(&self) -> usize {
        self.ones.min(self.total - self.ones)
    }

    /// `a / m`, the fraction of synthetic rows.
    pub fn probability<T: Scalar>(&self) -> T {
        T::from_count(self.ones) / T::from_count(self.total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    Leaf {
        counts: NodeCounts,
    },
    Split {
        rule: SplitRule<T>,
        counts: NodeCounts,
        /// Impurity reduction achieved by this split alone.
        gain: f64,
        left: usize,
        right: usize,
    },
}

impl<T> TreeNode<T> {
    pub fn counts(&self) -> NodeCounts {
        match *self {
            TreeNode::Leaf { counts } | TreeNode::Split { counts, .. } => counts,
        }
    }
}

/// A fitted tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> DecisionTree<T> {
    /// Single-leaf tree.
    pub fn leaf(ones: usize, total: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf {
                counts: NodeCounts::new(ones, total),
            }],
        }
    }

    /// Join two subtrees under a split. Counts and gain are derived from the
    /// children.
    pub fn join(rule: SplitRule<T>, left: DecisionTree<T>, right: DecisionTree<T>) -> Self {
        let lc = left.root_counts();
        let rc = right.root_counts();
        let counts = NodeCounts::new(lc.ones + rc.ones, lc.total + rc.total);
        let gain = counts.impurity::<f64>() - lc.impurity::<f64>() - rc.impurity::<f64>();
        let left_offset = 1;
        let right_offset = 1 + left.nodes.len();
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(TreeNode::Split {
            rule,
            counts,
            gain,
            left: left_offset,
            right: right_offset,
        });
        let shift = |node: TreeNode<T>, by: usize| match node {
            TreeNode::Split {
                rule,
                counts,
                gain,
                left,
                right,
            } => TreeNode::Split {
                rule,
                counts,
                gain,
                left: left + by,
                right: right + by,
            },
            leaf => leaf,
        };
        nodes.extend(left.nodes.into_iter().map(|n| shift(n, left_offset)));
        nodes.extend(right.nodes.into_iter().map(|n| shift(n, right_offset)));
        Self { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn root_counts(&self) -> NodeCounts {
        self.nodes[0].counts()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeCounts> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            TreeNode::Leaf { counts } => Some(counts),
            TreeNode::Split { .. } => None,
        })
    }

    /// Number of internal nodes.
    pub fn num_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[id] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        deepest
    }

    /// Total impurity `Σ a_i (1 - a_i/m_i)` over the leaves.
    pub fn gini_index(&self) -> T {
        self.leaves()
            .fold(T::zero(), |acc, c| acc + c.impurity::<T>())
    }

    /// Arena index of the leaf `row` is routed to.
    pub fn leaf_index(&self, row: &[T]) -> usize {
        let mut id = 0;
        while let TreeNode::Split {
            rule, left, right, ..
        } = &self.nodes[id]
        {
            id = if rule.goes_left(row) { *left } else { *right };
        }
        id
    }

    /// Leaf probability `a_i / m_i` for every row of `x`.
    pub fn predict_proba(&self, x: &DataMatrix<T>) -> Vec<T> {
        x.rows()
            .map(|row| self.nodes[self.leaf_index(row)].counts().probability())
            .collect()
    }

    /// pMSE from leaf counts alone: `(1/2n) Σ (a²/m - a + m/4)`, `2n = Σ m`.
    pub fn pmse_from_leaf_counts(&self) -> T {
        let quarter = T::lit(0.25);
        let (sum, big_n) = self.leaves().fold((T::zero(), 0usize), |(acc, n), c| {
            let a = T::from_count(c.ones);
            let m = T::from_count(c.total);
            (acc + a * a / m - a + quarter * m, n + c.total)
        });
        sum / T::from_count(big_n)
    }

    /// The tree [`fit_greedy`] returns under `cfg`, read off a tree from
    /// [`fit_greedy_grown`] grown with the same `min_leaf` and rule but a
    /// looser (or equal) depth limit and `cp`.
    pub fn prune(&self, cfg: &FitConfig) -> DecisionTree<T> {
        let limits = cfg.limits(self.root_counts());
        // Pre-order walk marking the splits growth under `cfg` would make.
        let mut order = Vec::new();
        let mut active = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            order.push(id);
            if let TreeNode::Split {
                counts,
                gain,
                left,
                right,
                ..
            } = self.nodes[id]
            {
                if cfg.may_split(&limits, counts, depth) && cfg.accepts_gain(&limits, gain) {
                    active[id] = true;
                    stack.push((right, depth + 1));
                    stack.push((left, depth + 1));
                }
            }
        }
        if cfg.cp_rule == CpRule::CostComplexity {
            self.collapse_weak_links(&order, &mut active, limits.alpha);
        }
        self.rebuild(&active)
    }

    /// Bottom-up complexity pass: clears `active` for splits whose subtree
    /// removes at most `alpha` misclassifications per split.
    fn collapse_weak_links(&self, preorder: &[usize], active: &mut [bool], alpha: f64) {
        #[derive(Clone, Copy, Default)]
        struct Summary {
            risk: usize,
            splits: usize,
            complexity: f64,
        }
        let mut summary = vec![Summary::default(); self.nodes.len()];
        for &id in preorder.iter().rev() {
            let own = self.nodes[id].counts().risk();
            let leaf = Summary {
                risk: own,
                splits: 0,
                complexity: alpha,
            };
            let TreeNode::Split { left, right, .. } = self.nodes[id] else {
                summary[id] = leaf;
                continue;
            };
            if !active[id] {
                summary[id] = leaf;
                continue;
            }
            let (l, r) = (summary[left], summary[right]);
            let (l_own, r_own) = (
                self.nodes[left].counts().risk(),
                self.nodes[right].counts().risk(),
            );
            let per_split = |lr: usize, ls: usize, rr: usize, rs: usize| {
                (own - lr - rr) as f64 / (ls + rs + 1) as f64
            };
            let (mut lr, mut ls, mut rr, mut rs) = (l.risk, l.splits, r.risk, r.splits);
            // The child with the weaker link collapses first, then possibly the other.
            if r.complexity > l.complexity {
                if per_split(lr, ls, rr, rs) > l.complexity {
                    (lr, ls) = (l_own, 0);
                    if per_split(lr, ls, rr, rs) > r.complexity {
                        (rr, rs) = (r_own, 0);
                    }
                }
            } else if per_split(lr, ls, rr, rs) > r.complexity {
                (rr, rs) = (r_own, 0);
                if per_split(lr, ls, rr, rs) > l.complexity {
                    (lr, ls) = (l_own, 0);
                }
            }
            let complexity = per_split(lr, ls, rr, rs);
            if complexity > alpha {
                summary[id] = Summary {
                    risk: l.risk + r.risk,
                    splits: l.splits + r.splits + 1,
                    complexity,
                };
            } else {
                active[id] = false;
                summary[id] = leaf;
            }
        }
    }

    /// Copy of the tree keeping only splits marked in `keep` (reached from
    /// the root through kept splits).
    fn rebuild(&self, keep: &[bool]) -> DecisionTree<T> {
        let mut nodes = vec![TreeNode::Leaf {
            counts: self.root_counts(),
        }];
        // (source id, slot in `nodes` to fill)
        let mut stack = vec![(0usize, 0usize)];
        while let Some((src, slot)) = stack.pop() {
            if !keep[src] {
                continue;
            }
            if let TreeNode::Split {
                rule,
                counts,
                gain,
                left,
                right,
            } = self.nodes[src]
            {
                let l = nodes.len();
                nodes.push(TreeNode::Leaf {
                    counts: self.nodes[left].counts(),
                });
                nodes.push(TreeNode::Leaf {
                    counts: self.nodes[right].counts(),
                });
                nodes[slot] = TreeNode::Split {
                    rule,
                    counts,
                    gain,
                    left: l,
                    right: l + 1,
                };
                stack.push((right, l + 1));
                stack.push((left, l));
            }
        }
        DecisionTree { nodes }
    }

    fn fmt_node(&self, f: &mut fmt::Formatter<'_>, id: usize, indent: usize) -> fmt::Result {
        let pad = "  ".repeat(indent);
        match &self.nodes[id] {
            TreeNode::Leaf { counts } => {
                writeln!(f, "{pad}leaf a={} m={}", counts.ones, counts.total)
            }
            TreeNode::Split {
                rule,
                counts,
                left,
                right,
                ..
            } => {
                writeln!(
                    f,
                    "{pad}x[{}] <= {} (a={} m={})",
                    rule.feature, rule.threshold, counts.ones, counts.total
                )?;
                self.fmt_node(f, *left, indent + 1)?;
                self.fmt_node(f, *right, indent + 1)
            }
        }
    }
}

/// Indented dump of split rules and leaf counts, for debugging.
impl<T: Scalar> fmt::Display for DecisionTree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(f, 0, 0)
    }
}

/// Free-function form of [`DecisionTree::gini_index`].
pub fn gini_index<T: Scalar>(tree: &DecisionTree<T>) -> T {
    tree.gini_index()
}

/// Free-function form of [`DecisionTree::predict_proba`] on a pool's predictors.
pub fn predict_proba<T: Scalar>(tree: &DecisionTree<T>, pool: &LabeledPool<T>) -> Vec<T> {
    tree.predict_proba(pool.predictors())
}

// ---------------------------------------------------------------------------
// Exact score arithmetic
// ---------------------------------------------------------------------------

/// `Σ a_i² / m_i` over a set of (ones, total) leaves. Minimising impurity is
/// the same as maximising this, since `Σ a_i` is fixed.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn of(leaves: &[(usize, usize)]) -> Score {
        let mut s = Score { num: 0, den: 1 };
        for &(a, m) in leaves {
            if m == 0 {
                continue;
            }
            let (a, m) = (a as u128, m as u128);
            s = Score {
                num: s.num * m + a * a * s.den,
                den: s.den * m,
            };
        }
        s
    }

    fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn cmp(self, other: Score) -> Ordering {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(l), Some(r)) => l.cmp(&r),
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }
}

// ---------------------------------------------------------------------------
// Sorted view of a pool
// ---------------------------------------------------------------------------

/// One feature of a pool in sorted order (ties by row index): row indices
/// with their values and labels alongside.
#[derive(Debug, Clone, Default)]
struct SortedFeature<T> {
    rows: Vec<u32>,
    values: Vec<T>,
    labels: Vec<bool>,
}

impl<T: Scalar> SortedFeature<T> {
    fn gather(rows: Vec<u32>, col: &[T], labels: &[bool]) -> Self {
        let values = rows.iter().map(|&r| col[r as usize]).collect();
        let labels = rows.iter().map(|&r| labels[r as usize]).collect();
        Self {
            rows,
            values,
            labels,
        }
    }

    /// Stable partition of positions `lo..hi` by `goes_left[row]`.
    fn partition(&mut self, lo: usize, hi: usize, goes_left: &[bool], scratch: &mut Scratch<T>) {
        let mut l = lo;
        let mut r = 0;
        for i in lo..hi {
            let row = self.rows[i];
            if goes_left[row as usize] {
                self.rows[l] = row;
                self.values[l] = self.values[i];
                self.labels[l] = self.labels[i];
                l += 1;
            } else {
                scratch.rows[r] = row;
                scratch.values[r] = self.values[i];
                scratch.labels[r] = self.labels[i];
                r += 1;
            }
        }
        self.rows[l..hi].copy_from_slice(&scratch.rows[..r]);
        self.values[l..hi].copy_from_slice(&scratch.values[..r]);
        self.labels[l..hi].copy_from_slice(&scratch.labels[..r]);
    }
}

struct Scratch<T> {
    rows: Vec<u32>,
    values: Vec<T>,
    labels: Vec<bool>,
}

/// A pool sorted by every feature, with a column-major copy of the values.
struct SortedPool<T> {
    columns: Vec<Vec<T>>,
    features: Vec<SortedFeature<T>>,
    labels: Vec<bool>,
}

/// Row indices ordered by value, ties by index.
fn argsort<T: Scalar>(col: &[T]) -> Vec<u32> {
    let mut keyed: Vec<(u64, u32)> = col
        .iter()
        .zip(0u32..)
        .map(|(&v, i)| (order_key(v), i))
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Integer key with the same order as the (finite) value; both zeros share a key.
fn order_key<T: Scalar>(v: T) -> u64 {
    debug_assert!(v.is_finite());
    let bits = (v.as_f64() + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

impl<T: Scalar> SortedPool<T> {
    fn new(pool: &LabeledPool<T>) -> Self {
        let x = pool.predictors();
        let columns: Vec<Vec<T>> = (0..x.ncols()).map(|j| x.column(j).collect()).collect();
        let labels = pool.labels().to_vec();
        let features = columns
            .iter()
            .map(|col| SortedFeature::gather(argsort(col), col, &labels))
            .collect();
        Self {
            columns,
            features,
            labels,
        }
    }

    /// Pool of `first` (label 0) stacked over `second` (label 1), reusing the
    /// presorted orders of `first`. Identical to sorting the stacked pool.
    fn stacked(first: &PresortedBlock<T>, second: &DataMatrix<T>) -> Self {
        let n1 = first.rows;
        let n2 = second.nrows();
        let labels: Vec<bool> = (0..n1 + n2).map(|i| i >= n1).collect();
        let mut columns = Vec::with_capacity(first.columns.len());
        let mut features = Vec::with_capacity(first.columns.len());
        for (j, (col1, ord1)) in first.columns.iter().zip(&first.orders).enumerate() {
            let col2: Vec<T> = second.column(j).collect();
            let ord2 = argsort(&col2);
            let mut merged = Vec::with_capacity(n1 + n2);
            let (mut a, mut b) = (0, 0);
            while a < n1 && b < n2 {
                // Ties go to the first block, whose row indices are smaller.
                if col1[ord1[a] as usize] <= col2[ord2[b] as usize] {
                    merged.push(ord1[a]);
                    a += 1;
                } else {
                    merged.push(ord2[b] + n1 as u32);
                    b += 1;
                }
            }
            merged.extend_from_slice(&ord1[a..]);
            merged.extend(ord2[b..].iter().map(|&r| r + n1 as u32));
            let mut col = Vec::with_capacity(n1 + n2);
            col.extend_from_slice(col1);
            col.extend_from_slice(&col2);
            features.push(SortedFeature::gather(merged, &col, &labels));
            columns.push(col);
        }
        Self {
            columns,
            features,
            labels,
        }
    }
}

/// A data block sorted once per column, to be stacked with many different
/// second blocks (for example, one original dataset against many synthetic
/// replicates).
#[derive(Debug, Clone)]
pub struct PresortedBlock<T> {
    rows: usize,
    columns: Vec<Vec<T>>,
    orders: Vec<Vec<u32>>,
}

impl<T: Scalar> PresortedBlock<T> {
    pub fn new(x: &DataMatrix<T>) -> Self {
        let columns: Vec<Vec<T>> = (0..x.ncols()).map(|j| x.column(j).collect()).collect();
        let orders = columns.iter().map(|col| argsort(col)).collect();
        Self {
            rows: x.nrows(),
            columns,
            orders,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }
}

fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy)]
struct BestSplit<T> {
    feature: usize,
    /// Rows going left; with the node's rows sorted on `feature`, they are the
    /// first `left_total`.
    left_total: usize,
    left_ones: usize,
    threshold: T,
}

impl<T> BestSplit<T> {
    fn score(&self, node: NodeCounts) -> Score {
        Score::of(&[
            (self.left_ones, self.left_total),
            (node.ones - self.left_ones, node.total - self.left_total),
        ])
    }
}

/// Best split of the node occupying positions `lo..hi` of every feature.
///
/// Candidates are ranked in floating point; exact scores settle only
/// near-ties, where rounding could decide the order.
fn best_split_in_range<T: Scalar>(
    features: &[SortedFeature<T>],
    lo: usize,
    hi: usize,
    ones: usize,
    min_leaf: usize,
) -> Option<BestSplit<T>> {
    const NEAR_TIE: f64 = 1e-9;
    let m = hi - lo;
    let min_leaf = min_leaf.max(1);
    if m < 2 * min_leaf {
        return None;
    }
    let (mf, onesf) = (m as f64, ones as f64);
    let exact =
        |a_left: usize, m_left: usize| Score::of(&[(a_left, m_left), (ones - a_left, m - m_left)]);
    let mut best: Option<BestSplit<T>> = None;
    let mut best_approx = f64::NEG_INFINITY;
    for (j, feature) in features.iter().enumerate() {
        let values = &feature.values[lo..hi];
        let labels = &feature.labels[lo..hi];
        let mut a_left: usize = labels[..min_leaf - 1].iter().map(|&l| l as usize).sum();
        for k in min_leaf - 1..m - min_leaf {
            a_left += labels[k] as usize;
            let (v, v_next) = (values[k], values[k + 1]);
            if !(v < v_next) {
                continue;
            }
            let m_left = k + 1;
            let (al, ml) = (a_left as f64, m_left as f64);
            let ar = onesf - al;
            let approx = al * al / ml + ar * ar / (mf - ml);
            if approx < best_approx * (1.0 - NEAR_TIE) {
                continue;
            }
            let better = match &best {
                None => true,
                Some(_) if approx > best_approx * (1.0 + NEAR_TIE) => true,
                Some(b) => {
                    exact(a_left, m_left).cmp(exact(b.left_ones, b.left_total)) == Ordering::Greater
                }
            };
            if better {
                best_approx = approx;
                best = Some(BestSplit {
                    feature: j,
                    left_total: m_left,
                    left_ones: a_left,
                    threshold: midpoint(v, v_next),
                });
            }
        }
    }
    best
}

/// Greedy top-down CART fit, pruned according to `cfg.cp_rule`.
pub fn fit_greedy<T: Scalar>(pool: &LabeledPool<T>, cfg: &FitConfig) -> Result<DecisionTree<T>> {
    Ok(fit_greedy_grown(pool, cfg)?.prune(cfg))
}

/// The greedy tree before the cost-complexity pass. Any stricter
/// configuration's fit can be read off it with [`DecisionTree::prune`].
pub fn fit_greedy_grown<T: Scalar>(
    pool: &LabeledPool<T>,
    cfg: &FitConfig,
) -> Result<DecisionTree<T>> {
    cfg.validate()?;
    grow_greedy(SortedPool::new(pool), cfg)
}

/// [`fit_greedy`] on `first` stacked over `second` and labelled as by
/// [`stack_and_label`](crate::dataset::stack_and_label); `first` is not re-sorted.
pub fn fit_greedy_stacked<T: Scalar>(
    first: &PresortedBlock<T>,
    second: &DataMatrix<T>,
    cfg: &FitConfig,
) -> Result<DecisionTree<T>> {
    cfg.validate()?;
    if first.ncols() != second.ncols() || first.nrows() != second.nrows() {
        return Err(PmseError::shape(
            "stacked blocks",
            format!("{}x{}", first.nrows(), first.ncols()),
            format!("{}x{}", second.nrows(), second.ncols()),
        ));
    }
    Ok(grow_greedy(SortedPool::stacked(first, second), cfg)?.prune(cfg))
}

fn grow_greedy<T: Scalar>(mut sp: SortedPool<T>, cfg: &FitConfig) -> Result<DecisionTree<T>> {
    let big_n = sp.labels.len();
    let root = NodeCounts::new(sp.labels.iter().filter(|&&l| l).count(), big_n);
    let limits = cfg.limits(root);

    let mut features = std::mem::take(&mut sp.features);
    let mut scratch = Scratch {
        rows: vec![0; big_n],
        values: vec![T::zero(); big_n],
        labels: vec![false; big_n],
    };
    let mut goes_left = vec![false; big_n];
    let mut nodes = vec![TreeNode::Leaf { counts: root }];

    struct Work {
        id: usize,
        lo: usize,
        hi: usize,
        depth: usize,
    }
    let mut stack = vec![Work {
        id: 0,
        lo: 0,
        hi: big_n,
        depth: 0,
    }];

    while let Some(Work { id, lo, hi, depth }) = stack.pop() {
        let counts = nodes[id].counts();
        if !cfg.may_split(&limits, counts, depth) {
            continue;
        }
        let Some(split) = best_split_in_range(&features, lo, hi, counts.ones, cfg.min_leaf) else {
            continue;
        };
        let parent_term = {
            let a = counts.ones as f64;
            a * a / counts.total as f64
        };
        let gain = split.score(counts).as_f64() - parent_term;
        if !cfg.accepts_gain(&limits, gain) {
            continue;
        }

        let mid = lo + split.left_total;
        for &row in &features[split.feature].rows[lo..mid] {
            goes_left[row as usize] = true;
        }
        for (j, feature) in features.iter_mut().enumerate() {
            if j != split.feature {
                feature.partition(lo, hi, &goes_left, &mut scratch);
            }
        }
        for &row in &features[split.feature].rows[lo..mid] {
            goes_left[row as usize] = false;
        }

        let left_counts = NodeCounts::new(split.left_ones, split.left_total);
        let right_counts = NodeCounts::new(
            counts.ones - split.left_ones,
            counts.total - split.left_total,
        );
        let left = nodes.len();
        nodes.push(TreeNode::Leaf {
            counts: left_counts,
        });
        nodes.push(TreeNode::Leaf {
            counts: right_counts,
        });
        nodes[id] = TreeNode::Split {
            rule: SplitRule {
                feature: split.feature,
                threshold: split.threshold,
            },
            counts,
            gain,
            left,
            right: left + 1,
        };
        stack.push(Work {
            id: left + 1,
            lo: mid,
            hi,
            depth: depth + 1,
        });
        stack.push(Work {
            id: left,
            lo,
            hi: mid,
            depth: depth + 1,
        });
    }
    Ok(DecisionTree { nodes })
}

// ---------------------------------------------------------------------------
// Exhaustive fitter
// ---------------------------------------------------------------------------

/// Globally optimal tree with at most `num_splits` (0, 1 or 2) splits.
///
/// Fails with [`PmseError::Resource`] when `N * C^D` exceeds `budget`, where
/// `C` counts candidate thresholds over all features.
pub fn fit_exact<T: Scalar>(
    pool: &LabeledPool<T>,
    num_splits: usize,
    budget: u64,
) -> Result<DecisionTree<T>> {
    if num_splits > 2 {
        return Err(PmseError::Domain(format!(
            "exhaustive search supports at most 2 splits, got {num_splits}"
        )));
    }
    let sp = SortedPool::new(pool);
    let big_n = pool.len();
    let candidates: u64 = sp
        .features
        .iter()
        .map(|f| f.values.windows(2).filter(|w| w[0] < w[1]).count() as u64)
        .sum();
    let work =
        (big_n as u128).saturating_mul((candidates as u128).saturating_pow(num_splits as u32));
    if work > budget as u128 {
        return Err(PmseError::Resource(format!(
            "exhaustive search over {candidates} thresholds with {num_splits} splits needs {work} \
             steps on {big_n} rows (budget {budget}); use a smaller pool or fewer splits"
        )));
    }

    let root = NodeCounts::new(pool.labels().iter().filter(|&&l| l).count(), big_n);
    let mut best_tree = DecisionTree::leaf(root.ones, root.total);
    if num_splits == 0 || root.is_pure() {
        return Ok(best_tree);
    }
    let mut best_score = Score::of(&[(root.ones, root.total)]);

    // One split: identical search to a depth-one greedy node.
    if let Some(s) = best_split_in_range(&sp.features, 0, big_n, root.ones, 1) {
        let score = s.score(root);
        if score.cmp(best_score) == Ordering::Greater {
            best_score = score;
            best_tree = DecisionTree::join(
                SplitRule {
                    feature: s.feature,
                    threshold: s.threshold,
                },
                DecisionTree::leaf(s.left_ones, s.left_total),
                DecisionTree::leaf(root.ones - s.left_ones, root.total - s.left_total),
            );
        }
    }
    if num_splits == 1 {
        return Ok(best_tree);
    }

    let mut in_left = vec![false; big_n];
    for f in 0..sp.features.len() {
        let order = &sp.features[f].rows;
        let col = &sp.columns[f];
        in_left.iter_mut().for_each(|b| *b = false);
        let mut a_left = 0;
        for k in 0..big_n - 1 {
            let row = order[k] as usize;
            in_left[row] = true;
            a_left += sp.labels[row] as usize;
            let (v, v_next) = (col[row], col[order[k + 1] as usize]);
            if !(v < v_next) {
                continue;
            }
            let root_rule = SplitRule {
                feature: f,
                threshold: midpoint(v, v_next),
            };
            let left = NodeCounts::new(a_left, k + 1);
            let right = NodeCounts::new(root.ones - a_left, big_n - k - 1);
            let (best_l, best_r) = best_child_splits(&sp, &in_left, left, right);
            if let Some(cs) = best_l {
                let score = Score::of(&[
                    (cs.left_ones, cs.left_total),
                    (left.ones - cs.left_ones, left.total - cs.left_total),
                    (right.ones, right.total),
                ]);
                if score.cmp(best_score) == Ordering::Greater {
                    best_score = score;
                    best_tree = DecisionTree::join(
                        root_rule,
                        DecisionTree::join(
                            cs.rule,
                            DecisionTree::leaf(cs.left_ones, cs.left_total),
                            DecisionTree::leaf(
                                left.ones - cs.left_ones,
                                left.total - cs.left_total,
                            ),
                        ),
                        DecisionTree::leaf(right.ones, right.total),
                    );
                }
            }
            if let Some(cs) = best_r {
                let score = Score::of(&[
                    (left.ones, left.total),
                    (cs.left_ones, cs.left_total),
                    (right.ones - cs.left_ones, right.total - cs.left_total),
                ]);
                if score.cmp(best_score) == Ordering::Greater {
                    best_score = score;
                    best_tree = DecisionTree::join(
                        root_rule,
                        DecisionTree::leaf(left.ones, left.total),
                        DecisionTree::join(
                            cs.rule,
                            DecisionTree::leaf(cs.left_ones, cs.left_total),
                            DecisionTree::leaf(
                                right.ones - cs.left_ones,
                                right.total - cs.left_total,
                            ),
                        ),
                    );
                }
            }
        }
    }
    Ok(best_tree)
}

#[derive(Debug, Clone, Copy)]
struct ChildSplit<T> {
    rule: SplitRule<T>,
    left_ones: usize,
    left_total: usize,
    score: Score,
}

/// Best single split inside each side of a root partition, scanning every
/// feature's global order once and filtering by side.
fn best_child_splits<T: Scalar>(
    sp: &SortedPool<T>,
    in_left: &[bool],
    left: NodeCounts,
    right: NodeCounts,
) -> (Option<ChildSplit<T>>, Option<ChildSplit<T>>) {
    struct Side<T> {
        totals: NodeCounts,
        seen: usize,
        ones: usize,
        prev: Option<T>,
        best: Option<ChildSplit<T>>,
    }
    let mut sides = [
        Side {
            totals: left,
            seen: 0,
            ones: 0,
            prev: None,
            best: None,
        },
        Side {
            totals: right,
            seen: 0,
            ones: 0,
            prev: None,
            best: None,
        },
    ];
    for (g, feature) in sp.features.iter().enumerate() {
        let col = &sp.columns[g];
        let order = &feature.rows;
        for side in sides.iter_mut() {
            side.seen = 0;
            side.ones = 0;
            side.prev = None;
        }
        for &row in order.iter() {
            let row = row as usize;
            let side = &mut sides[if in_left[row] { 0 } else { 1 }];
            let v = col[row];
            // A candidate sits between the previous member and this one.
            if let Some(p) = side.prev {
                if p < v {
                    let score = Score::of(&[
                        (side.ones, side.seen),
                        (side.totals.ones - side.ones, side.totals.total - side.seen),
                    ]);
                    if side
                        .best
                        .is_none_or(|b| score.cmp(b.score) == Ordering::Greater)
                    {
                        side.best = Some(ChildSplit {
                            rule: SplitRule {
                                feature: g,
                                threshold: midpoint(p, v),
                            },
                            left_ones: side.ones,
                            left_total: side.seen,
                            score,
                        });
                    }
                }
            }
            side.seen += 1;
            side.ones += sp.labels[row] as usize;
            side.prev = Some(v);
        }
    }
    let [l, r] = sides;
    (l.best, r.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DataMatrix;

    fn pool_1d(xs: &[f64], labels: &[u8]) -> LabeledPool<f64> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        LabeledPool::new(
            DataMatrix::from_unnamed_rows(&rows).unwrap(),
            labels.iter().map(|&l| l == 1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn gini_of_single_leaf() {
        assert_eq!(DecisionTree::<f64>::leaf(2, 4).gini_index(), 1.0);
        // a = n, m = 2n gives n/2.
        assert_eq!(DecisionTree::<f64>::leaf(7, 14).gini_index(), 3.5);
    }

    #[test]
    fn gini_of_pure_leaves_is_zero() {
        let t = DecisionTree::<f64>::join(
            SplitRule {
                feature: 0,
                threshold: 0.0,
            },
            DecisionTree::leaf(0, 3),
            DecisionTree::leaf(3, 3),
        );
        assert_eq!(t.gini_index(), 0.0);
        assert_eq!(gini_index(&t), 0.0);
    }

    #[test]
    fn greedy_finds_separating_threshold() {
        let pool = pool_1d(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let t = fit_greedy(&pool, &FitConfig::with_depth(Some(1), 0.0)).unwrap();
        match &t.nodes()[0] {
            TreeNode::Split { rule, .. } => assert_eq!(rule.threshold, 2.5),
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.gini_index(), 0.0);
        assert_eq!(predict_proba(&t, &pool), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn identical_labels_give_single_leaf() {
        // A pool cannot be unbalanced, so use identical predictor values: no
        // split exists at all.
        let pool = pool_1d(&[5.0, 5.0, 5.0, 5.0], &[0, 1, 0, 1]);
        let t = fit_greedy(&pool, &FitConfig::default()).unwrap();
        assert_eq!(t.num_splits(), 0);
    }

    #[test]
    fn depth_zero_is_root_leaf() {
        let pool = pool_1d(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let t = fit_greedy(&pool, &FitConfig::with_depth(Some(0), 0.0)).unwrap();
        assert_eq!(t.root_counts(), NodeCounts::new(2, 4));
        assert_eq!(t.num_splits(), 0);
        assert!(predict_proba(&t, &pool).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn exact_two_splits_isolate_alternating_labels() {
        let pool = pool_1d(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1]);
        let t = fit_exact(&pool, 2, DEFAULT_EXACT_BUDGET).unwrap();
        // Greedy with one split cannot do it.
        let g = fit_greedy(&pool, &FitConfig::with_depth(Some(1), 0.0)).unwrap();
        assert!(g.gini_index() > 0.0);
        // Three contiguous leaves over 0,1,0,1 always leave one mixed pair,
        // so the optimum is 0.5 (e.g. {1},{2},{3,4}).
        assert_eq!(t.num_splits(), 2);
        assert!((t.gini_index() - 0.5).abs() < 1e-12, "{t}");
    }

    #[test]
    fn exact_respects_budget() {
        let xs: Vec<f64> = (0..40).map(f64::from).collect();
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let pool = pool_1d(&xs, &labels);
        let err = fit_exact(&pool, 2, 1000).unwrap_err();
        assert!(matches!(err, PmseError::Resource(_)));
        assert!(fit_exact(&pool, 3, DEFAULT_EXACT_BUDGET).is_err());
    }

    #[test]
    fn leaf_lookup_probabilities() {
        let t = DecisionTree::<f64>::join(
            SplitRule {
                feature: 0,
                threshold: 0.5,
            },
            DecisionTree::leaf(2, 3),
            DecisionTree::leaf(1, 3),
        );
        let x = DataMatrix::from_unnamed_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let p = t.predict_proba(&x);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let pool = pool_1d(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1, 0, 0, 0, 1, 1]);
        let cfg = FitConfig {
            max_depth: Some(1),
            cp: 0.0,
            min_leaf: 3,
            ..FitConfig::default()
        };
        let t = fit_greedy(&pool, &cfg).unwrap();
        for leaf in t.leaves() {
            assert!(leaf.total >= 3);
        }
    }

    #[test]
    fn impurity_gain_rule_rejects_weak_root_split() {
        // The best split gains 0.3 against a root impurity of 1.5.
        let pool = pool_1d(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 1, 0, 1, 0, 1]);
        let rule = CpRule::ImpurityGain;
        let t = fit_greedy(
            &pool,
            &FitConfig::with_depth(Some(1), 0.31 / 1.5).with_rule(rule),
        )
        .unwrap();
        assert_eq!(t.num_splits(), 0);
        let t = fit_greedy(
            &pool,
            &FitConfig::with_depth(Some(1), 0.29 / 1.5).with_rule(rule),
        )
        .unwrap();
        assert_eq!(t.num_splits(), 1);
    }

    #[test]
    fn cost_complexity_keeps_subtree_by_average_risk_reduction() {
        // Root risk 4. Split at 2.5 leaves risk 0 + 2, the split at 6.5 removes
        // the remaining 2, so the whole subtree removes 2 per split.
        let pool = pool_1d(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            &[0, 0, 1, 1, 1, 1, 0, 0],
        );
        let t = fit_greedy(&pool, &FitConfig::with_depth(None, 0.49)).unwrap();
        assert_eq!(t.num_splits(), 2);
        assert_eq!(t.gini_index(), 0.0);
        let t = fit_greedy(&pool, &FitConfig::with_depth(None, 0.5)).unwrap();
        assert_eq!(t.num_splits(), 0);
        // Impurity gains are 2/3 at the root and 4/3 below; requiring 0.8
        // stops growth at the root.
        let gain_rule = FitConfig::with_depth(None, 0.4).with_rule(CpRule::ImpurityGain);
        assert_eq!(fit_greedy(&pool, &gain_rule).unwrap().num_splits(), 0);
        assert_eq!(
            fit_greedy(&pool, &FitConfig::with_depth(None, 0.4))
                .unwrap()
                .num_splits(),
            2
        );
    }

    #[test]
    fn display_lists_rules_and_leaves() {
        let pool = pool_1d(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let t = fit_greedy(&pool, &FitConfig::default()).unwrap();
        let text = t.to_string();
        assert!(text.starts_with("x[0] <= 2.5 (a=2 m=4)"), "{text}");
        assert!(text.contains("  leaf a=0 m=2"));
    }
}
