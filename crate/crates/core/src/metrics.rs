//! Top-K ranking and accuracy metrics over held-out items.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Per-user top-K item lists; known items are never included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingResult {
    pub k: usize,
    pub lists: Vec<Vec<u32>>,
}

fn by_score_then_index(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Highest-scoring `k` items not in `exclude` (sorted). Ties go to the
/// smaller item index.
pub fn top_k(scores: &[f64], exclude: &[u32], k: usize) -> Vec<u32> {
    let mut cand: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| exclude.binary_search(&(*i as u32)).is_err())
        .map(|(i, &s)| (s, i as u32))
        .collect();
    if cand.len() > k && k > 0 {
        cand.select_nth_unstable_by(k - 1, by_score_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_score_then_index);
    cand.truncate(k);
    cand.into_iter().map(|(_, i)| i).collect()
}

fn per_user_mean(
    ranking: &RankingResult,
    held_out: &[Vec<u32>],
    k: usize,
    term: impl Fn(&[u32], &[u32]) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut users = 0usize;
    for (u, truth) in held_out.iter().enumerate() {
        if truth.is_empty() {
            continue;
        }
        let list = ranking.lists.get(u).map(|l| &l[..l.len().min(k)]).unwrap_or(&[]);
        sum += term(list, truth);
        users += 1;
    }
    if users == 0 {
        return Err(Error::MetricUndefined);
    }
    Ok(sum / users as f64)
}

/// Mean over users with held-out items of `|top-k ∩ held_u| / |held_u|`.
/// `held_out[u]` must be sorted.
pub fn recall_at_k(ranking: &RankingResult, held_out: &[Vec<u32>], k: usize) -> Result<f64> {
    per_user_mean(ranking, held_out, k, |list, truth| {
        let hits = list.iter().filter(|i| truth.binary_search(i).is_ok()).count();
        hits as f64 / truth.len() as f64
    })
}

/// Binary-gain nDCG@k with `1/log2(rank + 1)` discounts, normalized by the
/// ideal DCG over `min(|held_u|, k)` positions.
pub fn ndcg_at_k(ranking: &RankingResult, held_out: &[Vec<u32>], k: usize) -> Result<f64> {
    per_user_mean(ranking, held_out, k, |list, truth| {
        let dcg: f64 = list
            .iter()
            .enumerate()
            .filter(|(_, i)| truth.binary_search(i).is_ok())
            .map(|(r, _)| 1.0 / ((r + 2) as f64).log2())
            .sum();
        let ideal: f64 = (0..truth.len().min(k)).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
        dcg / ideal
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranking(lists: Vec<Vec<u32>>) -> RankingResult {
        RankingResult { k: 20, lists }
    }

    #[test]
    fn recall_examples() {
        let r = ranking(vec![vec![1, 2, 3]]);
        assert_eq!(recall_at_k(&r, &[vec![1, 3]], 20).unwrap(), 1.0);
        assert_eq!(recall_at_k(&r, &[vec![1, 9]], 20).unwrap(), 0.5);
        assert!(matches!(recall_at_k(&r, &[vec![]], 20), Err(Error::MetricUndefined)));
    }

    #[test]
    fn recall_three_users_brute_force() {
        let r = ranking(vec![vec![0, 1, 2], vec![5, 4, 3], vec![7, 8, 9]]);
        let held = vec![vec![1, 7], vec![], vec![7, 8, 9]];
        // user 0: 1/2, user 1 skipped, user 2 with k = 2: 2/3
        let got = recall_at_k(&r, &held, 2).unwrap();
        assert!((got - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ndcg_examples() {
        let held = vec![vec![4]];
        assert_eq!(ndcg_at_k(&ranking(vec![vec![4, 1, 2]]), &held, 20).unwrap(), 1.0);
        let third = ndcg_at_k(&ranking(vec![vec![1, 2, 4]]), &held, 20).unwrap();
        assert!((third - 0.5).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&ranking(vec![vec![1, 2]]), &held, 20).unwrap(), 0.0);
    }

    #[test]
    fn top_k_masks_and_breaks_ties() {
        let scores = vec![0.0; 6];
        assert_eq!(top_k(&scores, &[1, 2], 3), vec![0, 3, 4]);
        let scores = vec![0.1, 0.9, 0.5, 0.9];
        assert_eq!(top_k(&scores, &[], 3), vec![1, 3, 2]);
        assert_eq!(top_k(&scores, &[1], 10), vec![3, 2, 0]);
    }

    proptest! {
        #[test]
        fn metrics_bounded_and_permutation_invariant(
            lists in prop::collection::vec(prop::collection::btree_set(0u32..30, 0..10), 1..8),
            held in prop::collection::vec(prop::collection::btree_set(0u32..30, 0..5), 1..8),
        ) {
            let n = lists.len().min(held.len());
            let lists: Vec<Vec<u32>> = lists.into_iter().take(n).map(|s| s.into_iter().collect()).collect();
            let held: Vec<Vec<u32>> = held.into_iter().take(n).map(|s| s.into_iter().collect()).collect();
            let r = ranking(lists.clone());
            if let (Ok(rec), Ok(nd)) = (recall_at_k(&r, &held, 5), ndcg_at_k(&r, &held, 5)) {
                prop_assert!((0.0..=1.0).contains(&rec));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&nd));
                let rev_l: Vec<Vec<u32>> = lists.iter().rev().cloned().collect();
                let rev_h: Vec<Vec<u32>> = held.iter().rev().cloned().collect();
                let rr = ranking(rev_l);
                prop_assert!((recall_at_k(&rr, &rev_h, 5).unwrap() - rec).abs() < 1e-12);
                prop_assert!((ndcg_at_k(&rr, &rev_h, 5).unwrap() - nd).abs() < 1e-12);
                // relabel items by x -> 29 - x
                let map = |v: &Vec<u32>| { let mut w: Vec<u32> = v.iter().map(|x| 29 - x).collect(); w.sort_unstable(); w };
                let rl = ranking(lists.iter().map(|l| l.iter().map(|x| 29 - x).collect()).collect());
                let rh: Vec<Vec<u32>> = held.iter().map(map).collect();
                prop_assert!((recall_at_k(&rl, &rh, 5).unwrap() - rec).abs() < 1e-12);
                prop_assert!((ndcg_at_k(&rl, &rh, 5).unwrap() - nd).abs() < 1e-12);
            }
        }

        #[test]
        fn ideal_ranking_has_unit_ndcg(held in prop::collection::vec(prop::collection::btree_set(0u32..30, 1..6), 1..6)) {
            let held: Vec<Vec<u32>> = held.into_iter().map(|s| s.into_iter().collect()).collect();
            let lists: Vec<Vec<u32>> = held.iter().map(|h| { let mut l = h.clone(); l.reverse(); l.push(99); l }).collect();
            prop_assert!((ndcg_at_k(&ranking(lists), &held, 20).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
