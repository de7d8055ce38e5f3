//! Trees checked against brute-force enumeration and structural identities.

use pmse_core::cart::{
    fit_exact, fit_greedy, fit_greedy_grown, CpRule, FitConfig, TreeFitter, DEFAULT_EXACT_BUDGET,
};
use pmse_core::dataset::{stack_and_label, DataMatrix, LabeledPool};
use proptest::prelude::*;

/// Gini index `Σ a(1 − a/m)` of leaves given as `(ones, total)`.
fn gini(leaves: &[(usize, usize)]) -> f64 {
    leaves
        .iter()
        .filter(|(_, m)| *m > 0)
        .map(|&(a, m)| a as f64 * (1.0 - a as f64 / m as f64))
        .sum()
}

fn counts(rows: &[usize], labels: &[bool]) -> (usize, usize) {
    (rows.iter().filter(|&&r| labels[r]).count(), rows.len())
}

/// Every `(feature, threshold)` that separates at least two distinct values.
fn candidate_splits(pool: &LabeledPool<f64>) -> Vec<(usize, f64)> {
    let x = pool.predictors();
    let mut out = Vec::new();
    for f in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(f).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        out.extend(vals.windows(2).map(|w| (f, 0.5 * (w[0] + w[1]))));
    }
    out
}

fn split(rows: &[usize], x: &DataMatrix<f64>, (f, t): (usize, f64)) -> (Vec<usize>, Vec<usize>) {
    rows.iter().partition(|&&r| x.get(r, f) <= t)
}

/// Smallest Gini index over all trees with at most `max_splits` (≤ 2) splits.
fn brute_force_gini(pool: &LabeledPool<f64>, max_splits: usize) -> f64 {
    let x = pool.predictors();
    let labels = pool.labels();
    let all: Vec<usize> = (0..pool.len()).collect();
    let mut best = gini(&[counts(&all, labels)]);
    if max_splits == 0 {
        return best;
    }
    let cands = candidate_splits(pool);
    for &s1 in &cands {
        let (l, r) = split(&all, x, s1);
        if l.is_empty() || r.is_empty() {
            continue;
        }
        best = best.min(gini(&[counts(&l, labels), counts(&r, labels)]));
        if max_splits < 2 {
            continue;
        }
        for &s2 in &cands {
            for (inner, other) in [(&l, &r), (&r, &l)] {
                let (a, b) = split(inner, x, s2);
                best = best.min(gini(&[
                    counts(&a, labels),
                    counts(&b, labels),
                    counts(other, labels),
                ]));
            }
        }
    }
    best
}

/// Pools of `2n` rows with values on a small integer grid (so ties occur).
fn small_pool() -> impl Strategy<Value = LabeledPool<f64>> {
    (2usize..=7, 1usize..=2).prop_flat_map(|(n, q)| {
        prop::collection::vec(0u8..6, 2 * n * q).prop_map(move |v| {
            let values: Vec<f64> = v.into_iter().map(f64::from).collect();
            let x = DataMatrix::from_row_major(
                values,
                2 * n,
                (0..q).map(|j| format!("x{j}")).collect(),
            )
            .unwrap();
            LabeledPool::new(x, (0..2 * n).map(|i| i >= n).collect()).unwrap()
        })
    })
}

fn continuous_pair() -> impl Strategy<Value = (DataMatrix<f64>, DataMatrix<f64>)> {
    (5usize..40, 1usize..=3).prop_flat_map(|(n, q)| {
        let block = move || {
            prop::collection::vec(-50.0f64..50.0, n * q).prop_map(move |v| {
                DataMatrix::from_row_major(v, n, (0..q).map(|j| format!("x{j}")).collect()).unwrap()
            })
        };
        (block(), block())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_fit_matches_enumeration(pool in small_pool()) {
        for d in 0..=2 {
            let tree = fit_exact(&pool, d, DEFAULT_EXACT_BUDGET).unwrap();
            prop_assert!(tree.num_splits() <= d);
            let want = brute_force_gini(&pool, d);
            prop_assert!((tree.gini_index() - want).abs() < 1e-9, "d={} got {} want {}", d, tree.gini_index(), want);
        }
    }

    #[test]
    fn exact_never_worse_than_greedy_with_same_split_count(pool in small_pool()) {
        let greedy = fit_greedy(&pool, &FitConfig::with_depth(Some(1), 0.0).with_rule(CpRule::ImpurityGain)).unwrap();
        let exact1 = fit_exact(&pool, 1, DEFAULT_EXACT_BUDGET).unwrap();
        let exact2 = fit_exact(&pool, 2, DEFAULT_EXACT_BUDGET).unwrap();
        prop_assert!((exact1.gini_index() - greedy.gini_index()).abs() < 1e-9);
        prop_assert!(exact2.gini_index() <= exact1.gini_index() + 1e-12);
    }

    #[test]
    fn leaves_conserve_rows((x, s) in continuous_pair(), depth in 1usize..8, cp in 0.0f64..0.05) {
        let pool = stack_and_label(&x, &s).unwrap();
        let tree = fit_greedy(&pool, &FitConfig::with_depth(Some(depth), cp)).unwrap();
        let total: usize = tree.leaves().map(|c| c.total).sum();
        let ones: usize = tree.leaves().map(|c| c.ones).sum();
        prop_assert_eq!(total, pool.len());
        prop_assert_eq!(ones, s.nrows());
        prop_assert!(tree.depth() <= depth);
    }

    #[test]
    fn pruning_matches_refit((x, s) in continuous_pair(), depth in 1usize..10, cp in 0.0f64..0.2, min_leaf in 1usize..4) {
        let pool = stack_and_label(&x, &s).unwrap();
        let strict = FitConfig { min_leaf, ..FitConfig::with_depth(Some(depth), cp) };
        let loose = FitConfig { min_leaf, ..FitConfig::with_depth(Some(12), 0.0) };
        let grown = fit_greedy_grown(&pool, &loose).unwrap();
        prop_assert_eq!(grown.prune(&strict), fit_greedy(&pool, &strict).unwrap());
    }

    #[test]
    fn swapping_block_labels_keeps_impurity((x, s) in continuous_pair(), depth in 1usize..6) {
        let pool = stack_and_label(&x, &s).unwrap();
        let fitter = TreeFitter::Greedy(FitConfig::with_depth(Some(depth), 0.0));
        let a = fitter.fit(&pool).unwrap();
        let b = fitter.fit(&pool.with_swapped_labels()).unwrap();
        prop_assert!((a.gini_index() - b.gini_index()).abs() < 1e-9);
        prop_assert!((a.pmse_from_leaf_counts() - b.pmse_from_leaf_counts()).abs() < 1e-12);
    }

    #[test]
    fn leaf_count_pmse_equals_prediction_pmse((x, s) in continuous_pair(), depth in 0usize..8) {
        let pool = stack_and_label(&x, &s).unwrap();
        let tree = fit_greedy(&pool, &FitConfig::with_depth(Some(depth), 0.0)).unwrap();
        let direct = tree
            .predict_proba(pool.predictors())
            .iter()
            .map(|p| (p - 0.5) * (p - 0.5))
            .sum::<f64>()
            / pool.len() as f64;
        prop_assert!((tree.pmse_from_leaf_counts() - direct).abs() < 1e-12);
    }
}

#[test]
fn alternating_labels_need_two_splits() {
    // 0 0 | 1 1 1 1 | 0 0 on one feature: two splits isolate the middle block.
    let rows: Vec<Vec<f64>> = (1..=8).map(|v| vec![v as f64]).collect();
    let x = DataMatrix::from_unnamed_rows(&rows).unwrap();
    let labels = vec![false, false, true, true, true, true, false, false];
    let pool = LabeledPool::new(x, labels).unwrap();
    assert_eq!(brute_force_gini(&pool, 2), 0.0);
    assert_eq!(
        fit_exact(&pool, 2, DEFAULT_EXACT_BUDGET)
            .unwrap()
            .gini_index(),
        0.0
    );
    assert!(
        fit_exact(&pool, 1, DEFAULT_EXACT_BUDGET)
            .unwrap()
            .gini_index()
            > 0.0
    );
}
