//! Reference implementations written straight from the definitions, sharing
//! no code with the library beyond the tokenizer.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

/// BM25 of every document against a token-multiset query, by brute force.
pub fn bm25_scores(docs: &[Vec<String>], query: &[String]) -> Vec<f64> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let mut qtf: BTreeMap<&str, f64> = BTreeMap::new();
    for t in query {
        *qtf.entry(t).or_default() += 1.0;
    }
    docs.iter()
        .map(|d| {
            let mut s = 0.0;
            for (t, &w) in &qtf {
                let tf = d.iter().filter(|x| x == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|e| e.iter().any(|x| x == t)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let norm = 1.0 - 0.75 + 0.75 * d.len() as f64 / avgdl;
                s += w * idf * (tf * 2.2 / (tf + 1.2 * norm));
            }
            s
        })
        .collect()
}

/// Indices of the `k` best positive scores, ties by index, skipping `skip`.
pub fn top_k_positive(scores: &[f64], k: usize, skip: Option<usize>) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..scores.len())
        .filter(|&i| Some(i) != skip && scores[i] > 0.0)
        .collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| i as u32).collect()
}

/// Exhaustive lexical graph: each document's tokens as the query.
pub fn lexical_graph(docs: &[Vec<String>], k: usize) -> Vec<Vec<u32>> {
    (0..docs.len())
        .map(|i| top_k_positive(&bm25_scores(docs, &docs[i]), k, Some(i)))
        .collect()
}

/// Exhaustive inner-product graph.
pub fn dense_graph(vectors: &[Vec<f32>], k: usize) -> Vec<Vec<u32>> {
    (0..vectors.len())
        .map(|i| {
            let mut idx: Vec<usize> = (0..vectors.len()).filter(|&j| j != i).collect();
            let dot = |j: usize| -> f64 {
                vectors[i]
                    .iter()
                    .zip(&vectors[j])
                    .map(|(a, b)| *a as f64 * *b as f64)
                    .sum()
            };
            let s: Vec<f64> = (0..vectors.len())
                .map(|j| if j == i { 0.0 } else { dot(j) })
                .collect();
            idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
            idx.into_iter().take(k).map(|j| j as u32).collect()
        })
        .collect()
}

fn oracle_rank(window: &[u32], grades: &HashMap<u32, u32>) -> Vec<u32> {
    let mut v = window.to_vec();
    v.sort_by_key(|d| Reverse(grades.get(d).copied().unwrap_or(0)));
    v
}

/// The adaptive loop transcribed step by step over plain ids, with a
/// grade-sorting ranker. Returns (final order, ranker calls).
pub fn simulate_adaptive(
    r0: &[u32],
    adj: &[Vec<u32>],
    grades: &HashMap<u32, u32>,
    (w, b, c, tk): (usize, usize, usize, usize),
) -> (Vec<u32>, usize) {
    let mut rest = r0.to_vec();
    let mut r1: Vec<(u32, usize, usize)> = Vec::new();
    let mut frontier: Vec<u32>;
    let mut use_frontier = false;
    let mut window: Vec<u32> = rest.iter().take(w).copied().collect();
    let mut l1: Vec<u32>;
    let mut calls = 0;
    loop {
        calls += 1;
        let batch = oracle_rank(&window, grades);
        rest.retain(|d| !batch.contains(d));
        l1 = batch.iter().take(b).copied().collect();
        for (i, &d) in batch.iter().enumerate().skip(b) {
            r1.push((d, calls, i + 1));
        }
        frontier = Vec::new();
        for src in &batch {
            for &n in adj[*src as usize].iter().take(tk) {
                let seen = l1.contains(&n) || r1.iter().any(|e| e.0 == n);
                if !seen && !frontier.contains(&n) {
                    frontier.push(n);
                }
            }
        }
        if r1.len() + b >= c {
            break;
        }
        use_frontier = !use_frontier;
        let (first, second) = if use_frontier {
            (&frontier, &rest)
        } else {
            (&rest, &frontier)
        };
        let pool = if first.is_empty() { second } else { first };
        if pool.is_empty() {
            break;
        }
        window = l1.iter().chain(pool.iter().take(b)).copied().collect();
    }
    r1.sort_by(|x, y| y.1.cmp(&x.1).then(x.2.cmp(&y.2)));
    let out = l1
        .into_iter()
        .chain(r1.into_iter().map(|e| e.0))
        .take(c)
        .collect();
    (out, calls)
}

/// Back-to-front sliding window over the top `c`, in place.
pub fn simulate_baseline(
    r0: &[u32],
    grades: &HashMap<u32, u32>,
    (w, b, c): (usize, usize, usize),
) -> (Vec<u32>, usize) {
    let mut list: Vec<u32> = r0.iter().take(c).copied().collect();
    let mut end = list.len();
    let mut calls = 0;
    loop {
        let start = end.saturating_sub(w);
        let ranked = oracle_rank(&list[start..end], grades);
        list[start..end].copy_from_slice(&ranked);
        calls += 1;
        if start == 0 {
            break;
        }
        end -= b;
    }
    (list, calls)
}
